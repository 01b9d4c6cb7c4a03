"""Monte Carlo experiment engine: calibration, sweeps, and result files.

Detection thresholds are the empirical (1 - pfa) quantiles of the test
statistic under target-free draws; probability-of-detection curves sweep
the target amplitude over an output-SINR grid; the classification
experiment calibrates the likelihood-ratio and peak-gating thresholds and
evaluates the sparse pipeline per hypothesis.  Every trial draws from an
RNG stream derived by hashing (base_seed, purpose, trial index), so runs
are reproducible bit for bit and independent of scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property, partial
from pathlib import Path
from typing import Sequence

import numpy as np

from .covariance import (
    clear_cov_from_eigensystem,
    estimate_clutter_cov,
    gram_eigensystem,
    hermitian_eigensystem,
)
from .detectors import DETECTOR_IDS, MF, SCM_AMF, mf_statistic, scm_amf
from .rank_select import MosRule, eig_gap_select_from_eigs, mos_select_from_eigs
from .scenario import (
    CovarianceModel,
    DataSet,
    ScenarioConfig,
    amplitude_for_sinr,
    build_covariances,
    draw_cut,
    steering_vector,
    synthesize,
)
from .sparse import (
    DEFAULT_Q_GRID,
    AngleGrid,
    ClassificationOutcome,
    ScenarioMetrics,
    classify,
    scenario_metrics,
    select_q,
)

RESULT_HEADER = ("detector", "sinr_db", "pd", "stderr", "n_trials", "threshold", "seed")
TRIAL_HEADER = ("trial", "seed", "statistic", "r_hat", "decision")


def derive_seed(base_seed: int, *tags) -> int:
    """Stable 64-bit seed hashed from the base seed and purpose tags.

    Independent of trial scheduling and of how many trials run; changing
    the trial count never perturbs earlier trials.
    """
    digest = hashlib.blake2b(
        repr((int(base_seed),) + tuple(tags)).encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def _map_chunks(chunk_fn, n_trials: int, workers: int) -> list:
    """Run chunk_fn(lo, hi) over [0, n_trials) and concatenate in order."""
    if n_trials <= 0:
        return []
    if workers <= 1:
        return list(chunk_fn(0, n_trials))
    n_chunks = min(n_trials, workers * 4)
    bounds = np.linspace(0, n_trials, n_chunks + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(chunk_fn, bounds[:-1], bounds[1:]))
    return [row for part in parts for row in part]


@dataclass(frozen=True)
class CurvePoint:
    """One probability-of-detection estimate on the SINR grid."""

    sinr_db: float
    pd: float
    stderr: float
    n_trials: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Detection experiment: scenario, detector list, and trial budgets.

    ``known_rank`` feeds the known-rank IDT-AMF variant and defaults to the
    number of noise-like jammers in the scenario.  ``n_max`` bounds the
    model-order search and defaults to half the array size.
    """

    scenario: ScenarioConfig
    detectors: tuple[str, ...] = (MF, "IDT-AMF-BIC")
    pfa: float = 1e-3
    n_calib_trials: int = 100_000
    n_pd_trials: int = 2_000
    sinr_grid_db: tuple[float, ...] = tuple(float(s) for s in range(8, 25))
    base_seed: int = 0
    known_rank: int | None = None
    n_max: int | None = None
    gic_rho: float = 2.0
    eig_threshold: float = 10.0
    loading: float = 0.0
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "detectors", tuple(self.detectors))
        object.__setattr__(self, "sinr_grid_db", tuple(float(s) for s in self.sinr_grid_db))
        unknown = [d for d in self.detectors if d not in DETECTOR_IDS]
        if unknown:
            raise ValueError(f"unknown detectors {unknown}; choose from {DETECTOR_IDS}")
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")
        if self.n_calib_trials < 1 or self.n_pd_trials < 1:
            raise ValueError("trial counts must be >= 1")

    def resolved_known_rank(self) -> int:
        if self.known_rank is not None:
            return int(self.known_rank)
        return len(self.scenario.noise_jammers)

    def resolved_n_max(self) -> int:
        if self.n_max is not None:
            return int(self.n_max)
        return self.scenario.geometry.n_elements // 2

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "detectors": list(self.detectors),
            "pfa": self.pfa,
            "n_calib_trials": self.n_calib_trials,
            "n_pd_trials": self.n_pd_trials,
            "sinr_grid_db": list(self.sinr_grid_db),
            "base_seed": self.base_seed,
            "known_rank": self.known_rank,
            "n_max": self.n_max,
            "gic_rho": self.gic_rho,
            "eig_threshold": self.eig_threshold,
            "loading": self.loading,
        }


_IDT_METHODS = {
    "IDT-AMF": "known",
    "IDT-AMF-AIC": "aic",
    "IDT-AMF-BIC": "bic",
    "IDT-AMF-GIC": "gic",
    "IDT-AMF-EIG": "eig",
}


@dataclass(frozen=True)
class _DetectorBank:
    """Evaluates every requested detector on one draw, sharing work.

    The clear-set eigensystem is computed once and reused by all rank
    rules; the two-step covariance estimate is cached per distinct rank.
    """

    detectors: tuple[str, ...]
    steering: np.ndarray
    mf_weight: np.ndarray | None
    mf_denom: float
    known_rank: int
    n_max: int
    gic_rho: float
    eig_threshold: float
    loading: float

    @cached_property
    def idt_variants(self) -> tuple[tuple[str, str], ...]:
        return tuple((d, _IDT_METHODS[d]) for d in self.detectors if d in _IDT_METHODS)

    @cached_property
    def training_free(self) -> bool:
        return all(d == MF for d in self.detectors)

    def mf_only_statistic(self, cut: np.ndarray) -> float:
        return float(abs(np.vdot(cut, self.mf_weight)) ** 2) / self.mf_denom

    def statistics(self, data: DataSet) -> dict[str, tuple[float, int | None]]:
        out: dict[str, tuple[float, int | None]] = {}
        if MF in self.detectors:
            out[MF] = (self.mf_only_statistic(data.cut), None)
        if SCM_AMF in self.detectors:
            out[SCM_AMF] = (
                scm_amf(data.cut, data.train_clutter, self.steering).statistic,
                None,
            )
        if self.idt_variants:
            eigen = gram_eigensystem(data.train_clear)
            m = data.train_clear.shape[1]
            scaled = eigen.values / m
            cov_cache: dict[int, np.ndarray] = {}
            for det_id, method in self.idt_variants:
                if method == "known":
                    rank = self.known_rank
                elif method == "eig":
                    rank = eig_gap_select_from_eigs(scaled, self.eig_threshold).rank
                else:
                    rank = mos_select_from_eigs(
                        eigen.values, m, MosRule(method, self.gic_rho), self.n_max
                    ).rank
                if rank not in cov_cache:
                    clear = clear_cov_from_eigensystem(eigen, m, rank, self.loading)
                    clutter = estimate_clutter_cov(data.train_clutter, clear)
                    cov_cache[rank] = clear.matrix + clutter.matrix
                out[det_id] = (mf_statistic(data.cut, self.steering, cov_cache[rank]), rank)
        return out


def _make_bank(config: ExperimentConfig, cov: CovarianceModel, steering: np.ndarray) -> _DetectorBank:
    n = config.scenario.geometry.n_elements
    if SCM_AMF in config.detectors and config.scenario.n_train_clutter < n:
        raise ValueError(
            f"SCM-AMF needs n_train_clutter >= {n}, got {config.scenario.n_train_clutter}"
        )
    known_rank = config.resolved_known_rank()
    if "IDT-AMF" in config.detectors:
        if not 0 <= known_rank < n:
            raise ValueError(f"known rank {known_rank} out of range [0, {n - 1}]")
        if config.scenario.n_train_clear <= known_rank:
            raise ValueError("known rank requires n_train_clear > rank")
    mf_weight = None
    mf_denom = 1.0
    if MF in config.detectors:
        mf_weight = np.linalg.solve(cov.cut_cov, steering)
        mf_denom = float(np.real(np.vdot(steering, mf_weight)))
    return _DetectorBank(
        detectors=config.detectors,
        steering=steering,
        mf_weight=mf_weight,
        mf_denom=mf_denom,
        known_rank=known_rank,
        n_max=config.resolved_n_max(),
        gic_rho=config.gic_rho,
        eig_threshold=config.eig_threshold,
        loading=config.loading,
    )


@dataclass(frozen=True)
class _DetectionPayload:
    scenario: ScenarioConfig
    cov: CovarianceModel
    bank: _DetectorBank
    base_seed: int
    tag: tuple
    hypothesis: str
    amplitude: float


def _detection_chunk(payload: _DetectionPayload, lo: int, hi: int) -> list[dict]:
    rows = []
    for trial in range(lo, hi):
        seed = derive_seed(payload.base_seed, *payload.tag, trial)
        if payload.bank.training_free:
            cut = draw_cut(payload.scenario, payload.cov, payload.amplitude, payload.hypothesis, seed)
            stats = {MF: (payload.bank.mf_only_statistic(cut), None)}
        else:
            data = synthesize(
                payload.scenario, payload.cov, payload.amplitude, payload.hypothesis, seed
            )
            stats = payload.bank.statistics(data)
        rows.append({"trial": trial, "seed": seed, "stats": stats})
    return rows


def threshold_from_statistics(statistics: np.ndarray, pfa: float) -> float:
    """Empirical detection threshold: exceeded by a pfa fraction of draws."""
    stats = np.asarray(statistics, dtype=float)
    n = stats.size
    k = int(round(pfa * n))
    if k < 1:
        raise ValueError(
            f"{n} trials cannot resolve the (1 - {pfa}) quantile; need at least {math.ceil(1 / pfa)}"
        )
    return float(np.sort(stats)[::-1][k])


def _cache_key(config: ExperimentConfig, detector: str) -> str:
    payload = config.to_dict()
    payload["detectors"] = [detector]
    payload["sinr_grid_db"] = []
    payload["n_pd_trials"] = 0
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.blake2b(blob.encode(), digest_size=16).hexdigest()


def _load_cache(path: Path) -> dict:
    if path.exists():
        return json.loads(path.read_text())
    return {}


def calibrate_thresholds(
    config: ExperimentConfig, cache_path: str | Path | None = None
) -> dict[str, float]:
    """Empirical thresholds for every configured detector under H00 draws.

    All detectors share the same trial draws (the statistics of each
    detector depend only on its slice of the draw, so joint and solo
    calibration agree).  With ``cache_path`` set, thresholds are cached on
    disk keyed by a hash of the per-detector configuration.
    """
    recommended = 100.0 / config.pfa
    if config.n_calib_trials < recommended:
        warnings.warn(
            f"{config.n_calib_trials} calibration trials is below the recommended "
            f"100/pfa = {recommended:.0f}; the threshold quantile will be noisy",
            stacklevel=2,
        )
    cache: dict = {}
    if cache_path is not None:
        cache = _load_cache(Path(cache_path))
    thresholds = {}
    missing = []
    for det in config.detectors:
        key = _cache_key(config, det)
        if key in cache:
            thresholds[det] = float(cache[key])
        else:
            missing.append(det)
    if not missing:
        return thresholds

    run_config = replace(config, detectors=tuple(missing))
    scenario = run_config.scenario.without_coherent_jammers()
    cov = build_covariances(scenario)
    steering = steering_vector(scenario.geometry, scenario.target_aoa_deg)
    payload = _DetectionPayload(
        scenario=scenario,
        cov=cov,
        bank=_make_bank(run_config, cov, steering),
        base_seed=config.base_seed,
        tag=("calib",),
        hypothesis="H00",
        amplitude=0.0,
    )
    rows = _map_chunks(partial(_detection_chunk, payload), config.n_calib_trials, config.workers)
    for det in missing:
        stats = np.array([row["stats"][det][0] for row in rows])
        thresholds[det] = threshold_from_statistics(stats, config.pfa)
    if cache_path is not None:
        for det in missing:
            cache[_cache_key(config, det)] = thresholds[det]
        Path(cache_path).write_text(json.dumps(cache, sort_keys=True, indent=2) + "\n")
    return thresholds


def calibrate_threshold(
    config: ExperimentConfig, detector: str, cache_path: str | Path | None = None
) -> float:
    """Threshold for a single detector (identical to its joint value)."""
    solo = replace(config, detectors=(detector,))
    return calibrate_thresholds(solo, cache_path)[detector]


def pd_sweep(
    config: ExperimentConfig, thresholds: dict[str, float]
) -> dict[str, tuple[CurvePoint, ...]]:
    """Detection probability of each detector across the SINR grid.

    The target amplitude at each grid point is solved from the output-SINR
    definition; trials run under the target-present hypothesis with the
    calibrated thresholds applied.
    """
    for det in config.detectors:
        if det not in thresholds:
            raise ValueError(f"no threshold supplied for {det}")
    scenario = config.scenario.without_coherent_jammers()
    cov = build_covariances(scenario)
    steering = steering_vector(scenario.geometry, scenario.target_aoa_deg)
    bank = _make_bank(config, cov, steering)
    curves: dict[str, list[CurvePoint]] = {det: [] for det in config.detectors}
    n = config.n_pd_trials
    for sinr in config.sinr_grid_db:
        payload = _DetectionPayload(
            scenario=scenario,
            cov=cov,
            bank=bank,
            base_seed=config.base_seed,
            tag=("pd", repr(float(sinr))),
            hypothesis="H1",
            amplitude=amplitude_for_sinr(sinr, cov, steering),
        )
        rows = _map_chunks(partial(_detection_chunk, payload), n, config.workers)
        for det in config.detectors:
            hits = sum(1 for row in rows if row["stats"][det][0] > thresholds[det])
            pd = hits / n
            curves[det].append(
                CurvePoint(
                    sinr_db=float(sinr),
                    pd=pd,
                    stderr=math.sqrt(pd * (1.0 - pd) / n),
                    n_trials=n,
                )
            )
    return {det: tuple(points) for det, points in curves.items()}


def run_detector_trials(
    config: ExperimentConfig,
    detector: str,
    hypothesis: str,
    sinr_db: float,
    threshold: float,
    n_trials: int,
) -> list[dict]:
    """Per-trial records (trial, seed, statistic, r_hat, decision)."""
    run_config = replace(config, detectors=(detector,))
    scenario = run_config.scenario
    if hypothesis in ("H00", "H1"):
        scenario = scenario.without_coherent_jammers()
    cov = build_covariances(scenario)
    steering = steering_vector(scenario.geometry, scenario.target_aoa_deg)
    amplitude = 0.0
    if hypothesis in ("H1", "H3"):
        amplitude = amplitude_for_sinr(sinr_db, cov, steering)
    payload = _DetectionPayload(
        scenario=scenario,
        cov=cov,
        bank=_make_bank(run_config, cov, steering),
        base_seed=config.base_seed,
        tag=("trials", hypothesis, repr(float(sinr_db))),
        hypothesis=hypothesis,
        amplitude=amplitude,
    )
    rows = _map_chunks(partial(_detection_chunk, payload), n_trials, config.workers)
    records = []
    for row in rows:
        stat, r_hat = row["stats"][detector]
        records.append(
            {
                "trial": row["trial"],
                "seed": row["seed"],
                "statistic": stat,
                "r_hat": r_hat,
                "decision": stat > threshold,
            }
        )
    return records


def sinr_at_pd(points: Sequence[CurvePoint], target: float = 0.9) -> float:
    """SINR (dB) where the curve first crosses the target Pd (interpolated)."""
    for i, point in enumerate(points):
        if point.pd >= target:
            if i == 0:
                return point.sinr_db
            prev = points[i - 1]
            if point.pd == prev.pd:
                return point.sinr_db
            frac = (target - prev.pd) / (point.pd - prev.pd)
            return prev.sinr_db + frac * (point.sinr_db - prev.sinr_db)
    return math.nan


@dataclass(frozen=True)
class PdSweepResult:
    """Calibrated thresholds plus the detection curves of one experiment."""

    config: ExperimentConfig
    thresholds: dict[str, float]
    curves: dict[str, tuple[CurvePoint, ...]]


def run_pd_experiment(
    config: ExperimentConfig, cache_path: str | Path | None = None
) -> PdSweepResult:
    """Calibrate every detector, then sweep Pd over the SINR grid."""
    thresholds = calibrate_thresholds(config, cache_path)
    curves = pd_sweep(config, thresholds)
    return PdSweepResult(config=config, thresholds=thresholds, curves=curves)


def emit_results(result: PdSweepResult, path: str | Path) -> tuple[Path, Path]:
    """Write the detection curves as CSV plus a JSON config sidecar.

    The CSV carries one row per (detector, SINR point) with the exact
    header ``detector,sinr_db,pd,stderr,n_trials,threshold,seed``; re-runs
    with the same configuration and seed are byte-identical.  Returns the
    CSV and sidecar paths.
    """
    csv_path = Path(path)
    try:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with csv_path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(RESULT_HEADER)
            for det in result.config.detectors:
                for point in result.curves.get(det, ()):
                    writer.writerow(
                        [
                            det,
                            repr(point.sinr_db),
                            repr(point.pd),
                            repr(point.stderr),
                            point.n_trials,
                            repr(result.thresholds[det]),
                            result.config.base_seed,
                        ]
                    )
        sidecar = csv_path.with_suffix(".json")
        sidecar.write_text(
            json.dumps(
                {"config": result.config.to_dict(), "thresholds": result.thresholds},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    except OSError as err:
        raise OSError(f"failed writing results to {csv_path}: {err}") from err
    return csv_path, sidecar


def read_results(path: str | Path) -> list[dict]:
    """Parse an emitted CSV back into typed rows (round-trip of emit_results)."""
    rows = []
    with Path(path).open(newline="") as handle:
        for row in csv.DictReader(handle):
            rows.append(
                {
                    "detector": row["detector"],
                    "sinr_db": float(row["sinr_db"]),
                    "pd": float(row["pd"]),
                    "stderr": float(row["stderr"]),
                    "n_trials": int(row["n_trials"]),
                    "threshold": float(row["threshold"]),
                    "seed": int(row["seed"]),
                }
            )
    return rows


@dataclass(frozen=True)
class ClassificationConfig:
    """Sparse-detector experiment: thresholds, sweep, and confusion runs.

    The scenario must contain the coherent jammers of the scene under
    test; target-free and target-only batches strip them automatically.
    ``false_target_prob`` sets the peak-gating budget; ``rank_method``
    picks how the covariance pipeline selects the jammer-subspace rank.
    """

    scenario: ScenarioConfig
    grid: AngleGrid
    pfa: float = 1e-3
    false_target_prob: float = 1e-2
    n_calib_trials: int = 5_000
    n_trials: int = 500
    sinr_grid_db: tuple[float, ...] = (5.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0)
    confusion_sinr_db: float | None = 20.0
    rank_method: str = "bic"
    known_rank: int | None = None
    n_max: int | None = None
    gic_rho: float = 2.0
    eig_threshold: float = 10.0
    loading: float = 0.0
    q_grid: tuple[float, ...] = DEFAULT_Q_GRID
    slim_delta: float = 1e-3
    slim_max_iter: int = 200
    h_max: int | None = None
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "sinr_grid_db", tuple(float(s) for s in self.sinr_grid_db))
        object.__setattr__(self, "q_grid", tuple(float(q) for q in self.q_grid))
        if not self.scenario.coherent_jammers:
            raise ValueError("classification experiments need coherent jammers in the scenario")
        if not 0.0 < self.pfa < 1.0 or not 0.0 < self.false_target_prob < 1.0:
            raise ValueError("pfa and false_target_prob must lie in (0, 1)")
        if self.n_calib_trials < 1 or self.n_trials < 1:
            raise ValueError("trial counts must be >= 1")
        if self.rank_method not in ("known", "aic", "bic", "gic", "eig"):
            raise ValueError(f"unknown rank_method {self.rank_method!r}")

    def resolved_known_rank(self) -> int:
        if self.known_rank is not None:
            return int(self.known_rank)
        return len(self.scenario.noise_jammers)

    def resolved_n_max(self) -> int:
        if self.n_max is not None:
            return int(self.n_max)
        return self.scenario.geometry.n_elements // 2

    def jammer_subsets(self) -> tuple[int, ...]:
        return tuple(
            sorted({self.grid.subset_of_angle(j.aoa_deg) for j in self.scenario.coherent_jammers})
        )

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "grid": {
                "angles_deg": [float(a) for a in self.grid.angles_deg],
                "subset_size": self.grid.subset_size,
                "target_subset_index": self.grid.target_subset_index,
            },
            "pfa": self.pfa,
            "false_target_prob": self.false_target_prob,
            "n_calib_trials": self.n_calib_trials,
            "n_trials": self.n_trials,
            "sinr_grid_db": list(self.sinr_grid_db),
            "confusion_sinr_db": self.confusion_sinr_db,
            "rank_method": self.rank_method,
            "known_rank": self.known_rank,
            "n_max": self.n_max,
            "gic_rho": self.gic_rho,
            "eig_threshold": self.eig_threshold,
            "loading": self.loading,
            "q_grid": list(self.q_grid),
            "slim_delta": self.slim_delta,
            "slim_max_iter": self.slim_max_iter,
            "h_max": self.h_max,
            "base_seed": self.base_seed,
        }


@dataclass(frozen=True)
class _SparsePayload:
    scenario: ScenarioConfig
    scenario_null: ScenarioConfig
    cov: CovarianceModel
    model: np.ndarray
    grid: AngleGrid
    rank_method: str
    known_rank: int
    n_max: int
    gic_rho: float
    eig_threshold: float
    loading: float
    q_grid: tuple[float, ...]
    slim_delta: float
    slim_max_iter: int
    h_max: int | None
    base_seed: int


def _sparse_trial(payload: _SparsePayload, hypothesis: str, amplitude: float, seed: int):
    """One pipeline pass: draw, estimate the ICM, recover, score the LRT."""
    scenario = payload.scenario if hypothesis in ("H2", "H3") else payload.scenario_null
    data = synthesize(scenario, payload.cov, amplitude, hypothesis, seed)

    eigen = gram_eigensystem(data.train_clear)
    m = data.train_clear.shape[1]
    if payload.rank_method == "known":
        rank = payload.known_rank
    elif payload.rank_method == "eig":
        rank = eig_gap_select_from_eigs(eigen.values / m, payload.eig_threshold).rank
    else:
        rank = mos_select_from_eigs(
            eigen.values, m, MosRule(payload.rank_method, payload.gic_rho), payload.n_max
        ).rank
    clear = clear_cov_from_eigensystem(eigen, m, rank, payload.loading)
    clutter = estimate_clutter_cov(data.train_clutter, clear)
    cut_cov_hat = clear.matrix + clutter.matrix

    spectrum = hermitian_eigensystem(cut_cov_hat)
    inv_root = (spectrum.vectors / np.sqrt(spectrum.values)) @ spectrum.vectors.conj().T
    whitened_model = inv_root @ payload.model
    whitened_cut = inv_root @ data.cut
    estimate = select_q(
        whitened_model,
        whitened_cut,
        q_grid=payload.q_grid,
        h_max=payload.h_max,
        delta=payload.slim_delta,
        max_iter=payload.slim_max_iter,
    )
    resid = whitened_cut - whitened_model @ estimate.alpha
    lrt = float(np.real(np.vdot(whitened_cut, whitened_cut)) - np.real(np.vdot(resid, resid)))
    return estimate, lrt


def _cls_calib_chunk(payload: _SparsePayload, lo: int, hi: int) -> list[tuple[float, float]]:
    rows = []
    for trial in range(lo, hi):
        seed = derive_seed(payload.base_seed, "cls-calib", trial)
        estimate, lrt = _sparse_trial(payload, "H00", 0.0, seed)
        peak = float(np.abs(estimate.alpha).max()) if estimate.support else 0.0
        rows.append((lrt, peak))
    return rows


def _cls_eval_chunk(
    payload: _SparsePayload,
    hypothesis: str,
    amplitude: float,
    lrt_threshold: float,
    peak_threshold: float,
    tag: tuple,
    lo: int,
    hi: int,
) -> list[dict]:
    gamma_true = _truth_occupancy(payload, hypothesis)
    rows = []
    for trial in range(lo, hi):
        seed = derive_seed(payload.base_seed, *tag, trial)
        estimate, lrt = _sparse_trial(payload, hypothesis, amplitude, seed)
        outcome = classify(
            estimate,
            payload.grid,
            lrt_pass=lrt > lrt_threshold,
            peak_threshold=peak_threshold,
            gamma_true=gamma_true,
        )
        rows.append(
            {
                "trial": trial,
                "seed": seed,
                "truth": hypothesis,
                "q_hat": estimate.q_hat,
                "support": [int(i) for i in estimate.support],
                "lrt": lrt,
                "lrt_pass": bool(outcome.lrt_pass),
                "decided": outcome.decided,
                "gamma_bar": [int(g) for g in outcome.gamma_bar],
                "anomaly": bool(outcome.anomaly),
            }
        )
    return rows


def _truth_occupancy(payload: _SparsePayload, hypothesis: str) -> np.ndarray:
    gamma = np.zeros(payload.grid.n_subsets, dtype=int)
    if hypothesis in ("H1", "H3"):
        gamma[payload.grid.target_subset_index] = 1
    if hypothesis in ("H2", "H3"):
        for jam in payload.scenario.coherent_jammers:
            gamma[payload.grid.subset_of_angle(jam.aoa_deg)] = 1
    return gamma


def _outcomes_from_rows(rows: list[dict], gamma_true: np.ndarray) -> list[ClassificationOutcome]:
    return [
        ClassificationOutcome(
            decided=row["decided"],
            gamma_bar=np.asarray(row["gamma_bar"], dtype=int),
            gamma_true=gamma_true,
            lrt_pass=row["lrt_pass"],
            anomaly=row["anomaly"],
        )
        for row in rows
    ]


@dataclass(frozen=True)
class ClassificationCurvePoint:
    sinr_db: float
    metrics: ScenarioMetrics


@dataclass(frozen=True)
class ClassificationResult:
    """Thresholds, per-SINR metrics, confusion matrix, and trial rows."""

    config: ClassificationConfig
    lrt_threshold: float
    peak_threshold: float
    curve: tuple[ClassificationCurvePoint, ...]
    confusion: dict[str, dict[str, float]] | None
    trials: tuple[dict, ...]


def _sparse_payload(config: ClassificationConfig) -> _SparsePayload:
    scenario = config.scenario
    cov = build_covariances(scenario)
    model = np.stack(
        [steering_vector(scenario.geometry, a) for a in config.grid.angles_deg], axis=1
    )
    return _SparsePayload(
        scenario=scenario,
        scenario_null=scenario.without_coherent_jammers(),
        cov=cov,
        model=model,
        grid=config.grid,
        rank_method=config.rank_method,
        known_rank=config.resolved_known_rank(),
        n_max=config.resolved_n_max(),
        gic_rho=config.gic_rho,
        eig_threshold=config.eig_threshold,
        loading=config.loading,
        q_grid=config.q_grid,
        slim_delta=config.slim_delta,
        slim_max_iter=config.slim_max_iter,
        h_max=config.h_max,
        base_seed=config.base_seed,
    )


def calibrate_classification_thresholds(config: ClassificationConfig) -> tuple[float, float]:
    """LRT and peak-gating thresholds from target- and jammer-free draws.

    The LRT threshold is the empirical (1 - pfa) quantile of the ratio
    statistic; the peak threshold is the (1 - false_target_prob) quantile
    of the largest refit amplitude magnitude, so any surviving peak under
    the null is a false object with the configured probability.
    """
    recommended = 100.0 / config.pfa
    if config.n_calib_trials < recommended:
        warnings.warn(
            f"{config.n_calib_trials} calibration trials is below the recommended "
            f"100/pfa = {recommended:.0f}; the LRT threshold will be noisy",
            stacklevel=2,
        )
    payload = _sparse_payload(config)
    rows = _map_chunks(
        partial(_cls_calib_chunk, payload), config.n_calib_trials, config.workers
    )
    lrts = np.array([row[0] for row in rows])
    peaks = np.array([row[1] for row in rows])
    return (
        threshold_from_statistics(lrts, config.pfa),
        threshold_from_statistics(peaks, config.false_target_prob),
    )


def run_classification_experiment(config: ClassificationConfig) -> ClassificationResult:
    """Calibrate, sweep the joint-attack scene over SINR, and classify.

    The SINR sweep runs under the full scene (target plus coherent
    jammers); the confusion matrix batches run one truth at a time
    (target-only, jammers-only, both) at ``confusion_sinr_db``.
    """
    payload = _sparse_payload(config)
    lrt_threshold, peak_threshold = calibrate_classification_thresholds(config)
    cov = payload.cov
    steering = steering_vector(config.scenario.geometry, config.scenario.target_aoa_deg)
    jam_subsets = config.jammer_subsets()
    target_subset = config.grid.target_subset_index

    all_rows: list[dict] = []
    curve: list[ClassificationCurvePoint] = []
    for sinr in config.sinr_grid_db:
        amplitude = amplitude_for_sinr(sinr, cov, steering)
        tag = ("cls-sweep", repr(float(sinr)))
        rows = _map_chunks(
            partial(
                _cls_eval_chunk, payload, "H3", amplitude, lrt_threshold, peak_threshold, tag
            ),
            config.n_trials,
            config.workers,
        )
        for row in rows:
            row["phase"] = "sweep"
            row["sinr_db"] = float(sinr)
        all_rows.extend(rows)
        outcomes = _outcomes_from_rows(rows, _truth_occupancy(payload, "H3"))
        metrics = scenario_metrics(outcomes, ["H3"] * len(outcomes), jam_subsets, target_subset)
        curve.append(ClassificationCurvePoint(sinr_db=float(sinr), metrics=metrics))

    confusion = None
    if config.confusion_sinr_db is not None:
        amplitude = amplitude_for_sinr(config.confusion_sinr_db, cov, steering)
        outcomes: list[ClassificationOutcome] = []
        truths: list[str] = []
        for truth in ("H1", "H2", "H3"):
            amp = 0.0 if truth == "H2" else amplitude
            tag = ("cls-confusion", truth)
            rows = _map_chunks(
                partial(_cls_eval_chunk, payload, truth, amp, lrt_threshold, peak_threshold, tag),
                config.n_trials,
                config.workers,
            )
            for row in rows:
                row["phase"] = "confusion"
                row["sinr_db"] = float(config.confusion_sinr_db)
            all_rows.extend(rows)
            outcomes.extend(_outcomes_from_rows(rows, _truth_occupancy(payload, truth)))
            truths.extend([truth] * len(rows))
        confusion = scenario_metrics(outcomes, truths, jam_subsets, target_subset).confusion

    return ClassificationResult(
        config=config,
        lrt_threshold=lrt_threshold,
        peak_threshold=peak_threshold,
        curve=tuple(curve),
        confusion=confusion,
        trials=tuple(all_rows),
    )


CLASSIFICATION_CURVE_HEADER = (
    "sinr_db",
    "pd",
    "pt_given_h3",
    "n_mj",
    "n_g",
    "hausdorff_rms",
    "n_trials",
)


def write_classification_outputs(
    result: ClassificationResult, out_dir: str | Path, stem: str = "classification"
) -> dict[str, Path]:
    """Write trial JSONL, the aggregate curve CSV, the confusion CSV, and
    a JSON sidecar with the configuration and calibrated thresholds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    trials_path = out / f"{stem}_trials.jsonl"
    with trials_path.open("w") as handle:
        for row in result.trials:
            handle.write(json.dumps(row, sort_keys=True) + "\n")
    paths["trials"] = trials_path

    curve_path = out / f"{stem}_curve.csv"
    with curve_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CLASSIFICATION_CURVE_HEADER)
        for point in result.curve:
            m = point.metrics
            writer.writerow(
                [
                    repr(point.sinr_db),
                    repr(m.pd),
                    repr(m.pt_given_h3),
                    repr(m.n_mj),
                    repr(m.n_g),
                    repr(m.hausdorff_rms),
                    m.n_trials,
                ]
            )
    paths["curve"] = curve_path

    if result.confusion is not None:
        confusion_path = out / f"{stem}_confusion.csv"
        with confusion_path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["truth", "declared_H00", "declared_H1", "declared_H2", "declared_H3"])
            for truth in ("H1", "H2", "H3"):
                row = result.confusion.get(truth, {})
                writer.writerow(
                    [truth] + [repr(row.get(h, 0.0)) for h in ("H00", "H1", "H2", "H3")]
                )
        paths["confusion"] = confusion_path

    sidecar = out / f"{stem}_config.json"
    sidecar.write_text(
        json.dumps(
            {
                "config": result.config.to_dict(),
                "lrt_threshold": result.lrt_threshold,
                "peak_threshold": result.peak_threshold,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    paths["config"] = sidecar
    return paths
