"""Scene construction for sidelobe-jamming detection experiments.

Builds uniform-linear-array steering vectors, structured interference
covariance models (thermal noise + noise-like jammers + exponentially
correlated clutter), and reproducible complex-Gaussian draws of the cell
under test together with the two training sets (clutter-bearing and
clutter-free).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg

HYPOTHESES = ("H00", "H1", "H2", "H3")

NOISE_LIKE = "noise_like"
COHERENT = "coherent"

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio from dB to linear scale (-inf maps to 0)."""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """Convert a linear power ratio to dB (0 maps to -inf)."""
    if value <= 0.0:
        return -math.inf
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_elements: int
    spacing_ratio: float = 0.5

    def __post_init__(self) -> None:
        if self.n_elements < 2:
            raise ValueError(f"n_elements must be >= 2, got {self.n_elements}")
        if self.spacing_ratio <= 0.0:
            raise ValueError(f"spacing_ratio must be > 0, got {self.spacing_ratio}")


@dataclass(frozen=True)
class JammerSpec:
    """One interferer: noise-like (raises the floor) or coherent (false echo).

    power_db is the jammer-to-noise ratio for a noise-like jammer; for a
    coherent jammer it is the squared amplitude relative to the noise power.
    """

    kind: str
    aoa_deg: float
    power_db: float

    def __post_init__(self) -> None:
        if self.kind not in (NOISE_LIKE, COHERENT):
            raise ValueError(f"kind must be '{NOISE_LIKE}' or '{COHERENT}', got {self.kind!r}")
        if not -90.0 < self.aoa_deg < 90.0:
            raise ValueError(f"aoa_deg must lie in (-90, 90), got {self.aoa_deg}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full generative description of one experiment.

    Powers are relative to ``noise_power`` (linear sigma^2): jammer terms
    enter the covariance as ``10^(power_db/10) * noise_power`` and clutter
    as ``10^(cnr_db/10) * noise_power``.  ``cnr_db = -inf`` disables
    clutter.  ``cj_random_phase`` draws a fresh uniform phase per trial for
    every coherent jammer amplitude; the default keeps phase 0.
    """

    geometry: ArrayGeometry
    noise_power: float = 1.0
    clutter_one_lag: float = 0.0
    cnr_db: float = -math.inf
    jammers: tuple[JammerSpec, ...] = ()
    target_aoa_deg: float = 0.0
    n_train_clutter: int = 1
    n_train_clear: int = 1
    cj_random_phase: bool = False

    def __post_init__(self) -> None:
        if self.noise_power <= 0.0:
            raise ValueError("noise_power must be > 0")
        if not 0.0 <= self.clutter_one_lag < 1.0:
            raise ValueError("clutter_one_lag must lie in [0, 1)")
        if self.n_train_clutter < 1 or self.n_train_clear < 1:
            raise ValueError("training sample counts must be >= 1")
        if not -90.0 < self.target_aoa_deg < 90.0:
            raise ValueError("target_aoa_deg must lie in (-90, 90)")
        object.__setattr__(self, "jammers", tuple(self.jammers))

    @property
    def noise_jammers(self) -> tuple[JammerSpec, ...]:
        return tuple(j for j in self.jammers if j.kind == NOISE_LIKE)

    @property
    def coherent_jammers(self) -> tuple[JammerSpec, ...]:
        return tuple(j for j in self.jammers if j.kind == COHERENT)

    def without_coherent_jammers(self) -> "ScenarioConfig":
        """Copy of this scenario with coherent jammers stripped (H00/H1 draws)."""
        return replace(self, jammers=self.noise_jammers)

    def to_dict(self) -> dict:
        return {
            "geometry": {
                "n_elements": self.geometry.n_elements,
                "spacing_ratio": self.geometry.spacing_ratio,
            },
            "noise_power": self.noise_power,
            "clutter_one_lag": self.clutter_one_lag,
            "cnr_db": self.cnr_db,
            "jammers": [
                {"kind": j.kind, "aoa_deg": j.aoa_deg, "power_db": j.power_db}
                for j in self.jammers
            ],
            "target_aoa_deg": self.target_aoa_deg,
            "n_train_clutter": self.n_train_clutter,
            "n_train_clear": self.n_train_clear,
            "cj_random_phase": self.cj_random_phase,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        geom = data["geometry"]
        return cls(
            geometry=ArrayGeometry(int(geom["n_elements"]), float(geom.get("spacing_ratio", 0.5))),
            noise_power=float(data.get("noise_power", 1.0)),
            clutter_one_lag=float(data.get("clutter_one_lag", 0.0)),
            cnr_db=float(data.get("cnr_db", -math.inf)),
            jammers=tuple(
                JammerSpec(str(j["kind"]), float(j["aoa_deg"]), float(j["power_db"]))
                for j in data.get("jammers", ())
            ),
            target_aoa_deg=float(data.get("target_aoa_deg", 0.0)),
            n_train_clutter=int(data["n_train_clutter"]),
            n_train_clear=int(data["n_train_clear"]),
            cj_random_phase=bool(data.get("cj_random_phase", False)),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class CovarianceModel:
    """Structured interference covariances of one scenario.

    cut_cov governs the cell under test and the clutter-bearing training
    set; clear_cov governs the clutter-free training set.  By construction
    clear_cov = noise + jammer_cov and cut_cov = clear_cov + clutter_cov.
    """

    cut_cov: np.ndarray
    clear_cov: np.ndarray
    clutter_cov: np.ndarray
    jammer_cov: np.ndarray

    @cached_property
    def cut_chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.cut_cov)

    @cached_property
    def clear_chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.clear_cov)


@dataclass(frozen=True)
class DataSet:
    """One Monte Carlo draw: CUT vector plus both training matrices."""

    cut: np.ndarray
    train_clutter: np.ndarray
    train_clear: np.ndarray
    true_hypothesis: str

    def __post_init__(self) -> None:
        n = self.cut.shape[0]
        if self.train_clutter.shape[0] != n or self.train_clear.shape[0] != n:
            raise ValueError("training sets and CUT must share the array dimension")
        if self.true_hypothesis not in HYPOTHESES:
            raise ValueError(f"unknown hypothesis {self.true_hypothesis!r}")


def steering_vector(geometry: ArrayGeometry, aoa_deg: float) -> np.ndarray:
    """Unit-modulus array response for a plane wave from ``aoa_deg``.

    Entry k equals exp(j*2*pi*spacing_ratio*k*sin(theta)); entry 0 is 1.
    """
    if not -90.0 < aoa_deg < 90.0:
        raise ValueError(f"aoa_deg must lie in (-90, 90), got {aoa_deg}")
    phase = 2.0 * np.pi * geometry.spacing_ratio * math.sin(math.radians(aoa_deg))
    return np.exp(1j * phase * np.arange(geometry.n_elements))


def build_covariances(config: ScenarioConfig) -> CovarianceModel:
    """Assemble the structured covariance pair from a scenario description.

    Clutter entry (i, j) is rho^|i-j| scaled by CNR and noise power; each
    noise-like jammer contributes a rank-one term JNR * noise_power * v v^H.
    Coherent jammers do not enter the covariances.  Raises
    ``numpy.linalg.LinAlgError`` if either full covariance fails its
    positive-definiteness check (cannot occur for valid inputs).
    """
    n = config.geometry.n_elements
    sigma2 = config.noise_power

    idx = np.arange(n)
    clutter = (
        db_to_linear(config.cnr_db)
        * sigma2
        * (config.clutter_one_lag ** np.abs(idx[:, None] - idx[None, :]))
    ).astype(complex)

    jammer = np.zeros((n, n), dtype=complex)
    for jam in config.noise_jammers:
        v = steering_vector(config.geometry, jam.aoa_deg)
        jammer += db_to_linear(jam.power_db) * sigma2 * np.outer(v, v.conj())

    clear = sigma2 * np.eye(n, dtype=complex) + jammer
    cut = clear + clutter

    np.linalg.cholesky(clear)
    np.linalg.cholesky(cut)
    return CovarianceModel(cut_cov=cut, clear_cov=clear, clutter_cov=clutter, jammer_cov=jammer)


def _standard_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circular complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * _SQRT_HALF


def _check_hypothesis(config: ScenarioConfig, hypothesis: str) -> None:
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    has_cj = bool(config.coherent_jammers)
    needs_cj = hypothesis in ("H2", "H3")
    if needs_cj and not has_cj:
        raise ValueError(f"{hypothesis} requires coherent jammers in the scenario")
    if not needs_cj and has_cj:
        raise ValueError(
            f"{hypothesis} draws must use a scenario without coherent jammers "
            "(see ScenarioConfig.without_coherent_jammers)"
        )


def _cut_vector(
    config: ScenarioConfig,
    cov: CovarianceModel,
    target_amplitude: complex,
    hypothesis: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the CUT.  Consumes the RNG in a fixed order: noise, CJ phases."""
    n = config.geometry.n_elements
    cut = cov.cut_chol @ _standard_complex_normal(rng, n)
    if hypothesis in ("H2", "H3"):
        for jam in config.coherent_jammers:
            amp = math.sqrt(db_to_linear(jam.power_db) * config.noise_power)
            if config.cj_random_phase:
                amp = amp * np.exp(2j * np.pi * rng.random())
            cut = cut + amp * steering_vector(config.geometry, jam.aoa_deg)
    if hypothesis in ("H1", "H3"):
        cut = cut + target_amplitude * steering_vector(config.geometry, config.target_aoa_deg)
    return cut


def synthesize(
    config: ScenarioConfig,
    cov: CovarianceModel,
    target_amplitude: complex,
    hypothesis: str,
    seed: int,
) -> DataSet:
    """Draw one data set under the requested hypothesis.

    Clutter-bearing training columns are i.i.d. CN(0, cut_cov); clear
    training columns are i.i.d. CN(0, clear_cov); the CUT carries the
    target and/or coherent-jammer components dictated by the hypothesis.
    Pure function of its arguments: a fixed seed reproduces the draw
    bit for bit.  Scenarios must contain coherent jammers exactly when the
    hypothesis is H2 or H3.
    """
    _check_hypothesis(config, hypothesis)
    rng = np.random.default_rng(seed)
    cut = _cut_vector(config, cov, target_amplitude, hypothesis, rng)
    n = config.geometry.n_elements
    train_clutter = cov.cut_chol @ _standard_complex_normal(rng, (n, config.n_train_clutter))
    train_clear = cov.clear_chol @ _standard_complex_normal(rng, (n, config.n_train_clear))
    return DataSet(
        cut=cut,
        train_clutter=train_clutter,
        train_clear=train_clear,
        true_hypothesis=hypothesis,
    )


def draw_cut(
    config: ScenarioConfig,
    cov: CovarianceModel,
    target_amplitude: complex,
    hypothesis: str,
    seed: int,
) -> np.ndarray:
    """Fast path for detectors that ignore training data.

    Returns exactly ``synthesize(...).cut`` for the same arguments; the RNG
    stream is consumed in the same order, just truncated.
    """
    _check_hypothesis(config, hypothesis)
    rng = np.random.default_rng(seed)
    return _cut_vector(config, cov, target_amplitude, hypothesis, rng)


def _whitened_energy(cov_matrix: np.ndarray, vec: np.ndarray) -> float:
    factor = scipy.linalg.cho_factor(cov_matrix)
    return float(np.real(np.vdot(vec, scipy.linalg.cho_solve(factor, vec))))


def sinr_db(target_amplitude: complex, cov: CovarianceModel, steering: np.ndarray) -> float:
    """Output signal-to-interference-plus-noise ratio in dB.

    Defined as 10*log10(|amplitude|^2 * v^H cut_cov^-1 v); zero amplitude
    returns -inf.  Raises ``scipy.linalg.LinAlgError`` for a non-positive
    definite covariance.
    """
    quad = _whitened_energy(cov.cut_cov, steering)
    power = abs(target_amplitude) ** 2 * quad
    return linear_to_db(power)


def amplitude_for_sinr(sinr_target_db: float, cov: CovarianceModel, steering: np.ndarray) -> float:
    """Real target amplitude achieving the requested output SINR (dB)."""
    if sinr_target_db == -math.inf:
        return 0.0
    quad = _whitened_energy(cov.cut_cov, steering)
    return math.sqrt(db_to_linear(sinr_target_db) / quad)
