"""Sparse amplitude recovery over an angle grid and echo classification.

The CUT is modeled as a sparse combination of steering vectors on a dense
angle grid.  A reweighted iterative minimizer recovers the amplitude
vector for each sparsity exponent q, an information criterion picks the
support size (by least-squares refit of the top peaks) and the best q, a
likelihood-ratio test decides presence, and a subset-occupancy rule
classifies the scene as target-only, jammers-only, or both.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

H00, H1, H2, H3 = "H00", "H1", "H2", "H3"

DEFAULT_Q_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))

# Entries this far below the peak are treated as exact zeros when forming
# the reweighting matrix and the stationarity residual.
MAGNITUDE_FLOOR = 1e-8


@dataclass(frozen=True)
class AngleGrid:
    """Dense angle grid partitioned into equal contiguous subsets.

    The grid length must be a whole multiple of the subset size; the subset
    holding the nominal target angle is singled out for classification.
    """

    angles_deg: np.ndarray
    subset_size: int
    target_subset_index: int

    def __post_init__(self) -> None:
        angles = np.asarray(self.angles_deg, dtype=float)
        object.__setattr__(self, "angles_deg", angles)
        if angles.ndim != 1 or angles.size < 2:
            raise ValueError("angles_deg must be a 1-D grid with at least two angles")
        if np.any(np.diff(angles) <= 0):
            raise ValueError("angles_deg must be strictly ascending")
        if self.subset_size < 1 or angles.size % self.subset_size != 0:
            raise ValueError(
                f"grid length {angles.size} must be a multiple of subset_size {self.subset_size}"
            )
        if not 0 <= self.target_subset_index < self.n_subsets:
            raise ValueError("target_subset_index out of range")

    @property
    def n_angles(self) -> int:
        return int(self.angles_deg.size)

    @property
    def n_subsets(self) -> int:
        return self.angles_deg.size // self.subset_size

    def subset_of_index(self, grid_index: int) -> int:
        if not 0 <= grid_index < self.n_angles:
            raise ValueError(f"grid index {grid_index} out of range")
        return grid_index // self.subset_size

    def subset_of_angle(self, aoa_deg: float) -> int:
        return self.subset_of_index(int(np.argmin(np.abs(self.angles_deg - aoa_deg))))

    @classmethod
    def from_span(
        cls,
        lo_deg: float,
        hi_deg: float,
        step_deg: float,
        subset_size: int,
        target_aoa_deg: float,
    ) -> "AngleGrid":
        n = int(round((hi_deg - lo_deg) / step_deg)) + 1
        angles = lo_deg + step_deg * np.arange(n)
        target_index = int(np.argmin(np.abs(angles - target_aoa_deg)))
        return cls(
            angles_deg=angles,
            subset_size=subset_size,
            target_subset_index=target_index // subset_size,
        )


@dataclass(frozen=True)
class SparseEstimate:
    """Refit sparse amplitude estimate with its support and q selection."""

    alpha: np.ndarray
    support: tuple[int, ...]
    q_hat: float
    bic_by_q: dict[float, float]
    iterations: int


@dataclass(frozen=True)
class ClassificationOutcome:
    """Decision among {H00, H1, H2, H3} plus the subset-occupancy vector."""

    decided: str
    gamma_bar: np.ndarray
    gamma_true: np.ndarray | None = None
    lrt_pass: bool = False
    anomaly: bool = False


def _initial_amplitudes(model: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Per-column adaptive matched estimates in the whitened domain."""
    energy = np.sum(np.abs(model) ** 2, axis=0)
    if np.any(energy <= 0.0):
        raise ValueError("model matrix has a zero column")
    return (model.conj().T @ obs) / energy


def _reweight(alpha: np.ndarray, q: float) -> np.ndarray:
    mag = np.abs(alpha)
    peak = mag.max()
    weights = np.where(mag > MAGNITUDE_FLOOR * peak, mag ** (2.0 - q), 0.0)
    return weights


def _slim_loop(
    model: np.ndarray,
    obs: np.ndarray,
    q: float,
    delta: float,
    max_iter: int,
    record: list | None = None,
) -> tuple[np.ndarray, int]:
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    if delta <= 0.0:
        raise ValueError("delta must be > 0")
    n = model.shape[0]
    eye = np.eye(n, dtype=complex)
    model_h = model.conj().T
    alpha = _initial_amplitudes(model, obs)
    if record is not None:
        record.append(alpha)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.abs(alpha).max() == 0.0:
            break
        weights = _reweight(alpha, q)
        gram = (model * weights) @ model_h + eye
        solved = np.linalg.solve(gram, obs)
        new = weights * (model_h @ solved)
        if not np.all(np.isfinite(new)):
            raise ValueError(f"sparse recovery diverged at iteration {iterations} (q={q})")
        step = float(np.linalg.norm(new - alpha))
        scale = float(np.linalg.norm(new))
        alpha = new
        if record is not None:
            record.append(alpha)
        if scale == 0.0 or step / scale < delta:
            break
    return alpha, iterations


def slim_iterate(
    model: np.ndarray,
    obs: np.ndarray,
    q: float,
    delta: float = 1e-3,
    max_iter: int = 200,
) -> np.ndarray:
    """Reweighted sparse recovery of the amplitude vector.

    ``model`` and ``obs`` are the whitened steering matrix and CUT.  Starts
    from the per-angle adaptive matched estimates, repeats
    alpha <- P model^H (model P model^H + I)^-1 obs with
    P = diag(|alpha_i|^(2-q)), and stops when the relative change drops
    below ``delta`` or after ``max_iter`` sweeps.  Aborts with ValueError
    on non-finite intermediates.
    """
    return _slim_loop(model, obs, q, delta, max_iter)[0]


def slim_trajectory(
    model: np.ndarray,
    obs: np.ndarray,
    q: float,
    delta: float = 1e-3,
    max_iter: int = 200,
) -> list[np.ndarray]:
    """All iterates of the recovery loop, starting with the initializer."""
    record: list[np.ndarray] = []
    _slim_loop(model, obs, q, delta, max_iter, record=record)
    return record


def slim_objective(alpha: np.ndarray, model: np.ndarray, obs: np.ndarray, q: float) -> float:
    """Penalized fit ||obs - model alpha||^2 + sum (2/q)(|alpha_i|^q - 1)."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    resid = obs - model @ alpha
    fit = float(np.real(np.vdot(resid, resid)))
    penalty = (2.0 / q) * float(np.sum(np.abs(alpha) ** q - 1.0))
    return fit + penalty


def stationarity_residual(
    alpha: np.ndarray, model: np.ndarray, obs: np.ndarray, q: float
) -> float:
    """Norm of the first-order optimality residual on above-floor entries."""
    mag = np.abs(alpha)
    peak = mag.max()
    if peak == 0.0:
        return float(np.linalg.norm(model.conj().T @ obs))
    active = mag > MAGNITUDE_FLOOR * peak
    grad = model.conj().T @ (model @ alpha - obs)
    safe_mag = np.where(active, mag, 1.0)
    grad = grad + np.where(active, alpha * safe_mag ** (q - 2.0), 0.0)
    return float(np.linalg.norm(grad[active]))


def select_q(
    model: np.ndarray,
    obs: np.ndarray,
    q_grid: Sequence[float] = DEFAULT_Q_GRID,
    h_max: int | None = None,
    delta: float = 1e-3,
    max_iter: int = 200,
) -> SparseEstimate:
    """Run the recovery for each q and pick support size and q by BIC.

    For each q the recovered entries are ranked by magnitude; supports of
    size h = 0..h_max are refit by least squares and scored with
    2*||obs - model alpha||^2 + 3*h*log(2n), treating the complex
    observation as 2n reals.  Rank-deficient refits are dropped.  Ties
    break toward smaller h and then smaller (earlier) q.
    """
    if len(q_grid) == 0:
        raise ValueError("q_grid must be nonempty")
    n = model.shape[0]
    n_cols = model.shape[1]
    if h_max is None:
        h_max = min(n - 1, 10)
    h_max = min(h_max, n_cols)
    obs_energy = float(np.real(np.vdot(obs, obs)))
    complexity = 3.0 * math.log(2 * n)

    best: tuple[float, float, tuple[int, ...], np.ndarray, int] | None = None
    bic_by_q: dict[float, float] = {}
    for q in q_grid:
        alpha_q, iterations = _slim_loop(model, obs, q, delta, max_iter)
        order = np.argsort(-np.abs(alpha_q), kind="stable")
        q_best: tuple[float, tuple[int, ...], np.ndarray] | None = None
        for h in range(h_max + 1):
            if h == 0:
                score = 2.0 * obs_energy
                candidate = (score, (), np.zeros(0, dtype=complex))
            else:
                support = np.sort(order[:h])
                sub = model[:, support]
                coef, _, rank, _ = np.linalg.lstsq(sub, obs, rcond=None)
                if rank < h:
                    continue
                resid = obs - sub @ coef
                score = 2.0 * float(np.real(np.vdot(resid, resid))) + complexity * h
                candidate = (score, tuple(int(i) for i in support), coef)
            if q_best is None or candidate[0] < q_best[0]:
                q_best = candidate
        assert q_best is not None  # h = 0 always scores
        bic_by_q[float(q)] = q_best[0]
        if best is None or q_best[0] < best[0]:
            best = (q_best[0], float(q), q_best[1], q_best[2], iterations)

    _, q_hat, support, coef, iterations = best
    alpha = np.zeros(n_cols, dtype=complex)
    if support:
        alpha[list(support)] = coef
    return SparseEstimate(
        alpha=alpha,
        support=support,
        q_hat=q_hat,
        bic_by_q=bic_by_q,
        iterations=iterations,
    )


def lrt_statistic(
    cut: np.ndarray,
    model: np.ndarray,
    alpha: np.ndarray,
    cut_cov: np.ndarray,
) -> float:
    """Log likelihood ratio of the fitted sparse scene against noise only.

    Equals z^H C^-1 z - (z - V alpha)^H C^-1 (z - V alpha) for the
    (estimated) CUT covariance C; compared against a log-domain threshold.
    Raises ``scipy.linalg.LinAlgError`` for a non-positive definite C.
    """
    factor = scipy.linalg.cho_factor(cut_cov)
    full = float(np.real(np.vdot(cut, scipy.linalg.cho_solve(factor, cut))))
    resid = cut - model @ alpha
    rest = float(np.real(np.vdot(resid, scipy.linalg.cho_solve(factor, resid))))
    return full - rest


def occupancy(grid: AngleGrid, alpha: np.ndarray, peak_threshold: float) -> np.ndarray:
    """0/1 subset-occupancy vector after gating small amplitudes."""
    if alpha.shape[0] != grid.n_angles:
        raise ValueError("amplitude vector length does not match the grid")
    gamma = np.zeros(grid.n_subsets, dtype=int)
    for index in np.flatnonzero(np.abs(alpha) > peak_threshold):
        gamma[grid.subset_of_index(int(index))] = 1
    return gamma


def classify(
    estimate: SparseEstimate,
    grid: AngleGrid,
    lrt_pass: bool,
    peak_threshold: float,
    gamma_true: np.ndarray | None = None,
) -> ClassificationOutcome:
    """Decide the scene hypothesis from subset occupancy.

    Entries at or below ``peak_threshold`` are discarded first.  A failed
    likelihood-ratio test gives H00.  With one occupied subset the decision
    is H1 when it is the target subset and H2 otherwise; with several it is
    H3 when the target subset is among them and H2 otherwise.  An empty
    occupancy despite a passed test is declared H00 and flagged.
    """
    gamma = occupancy(grid, estimate.alpha, peak_threshold)
    occupied = np.flatnonzero(gamma)
    anomaly = False
    if not lrt_pass:
        decided = H00
    elif occupied.size == 0:
        decided = H00
        anomaly = True
        logger.warning("likelihood test passed but no subset is occupied after gating")
    elif occupied.size == 1:
        decided = H1 if occupied[0] == grid.target_subset_index else H2
    else:
        decided = H3 if grid.target_subset_index in occupied else H2
    return ClassificationOutcome(
        decided=decided,
        gamma_bar=gamma,
        gamma_true=None if gamma_true is None else np.asarray(gamma_true, dtype=int),
        lrt_pass=lrt_pass,
        anomaly=anomaly,
    )


def hausdorff(
    set_x: Iterable[int], set_y: Iterable[int], empty_value: float = math.inf
) -> float:
    """Hausdorff distance between two integer index sets.

    Distance is the absolute index difference.  By convention two empty
    sets are at distance 0 and exactly one empty set yields
    ``empty_value`` (the metric is undefined there).
    """
    xs = np.asarray(sorted(set(int(i) for i in set_x)))
    ys = np.asarray(sorted(set(int(i) for i in set_y)))
    if xs.size == 0 and ys.size == 0:
        return 0.0
    if xs.size == 0 or ys.size == 0:
        return float(empty_value)
    dist = np.abs(xs[:, None] - ys[None, :])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


@dataclass(frozen=True)
class ScenarioMetrics:
    """Aggregate classification quality over a batch of trials."""

    n_mj: float
    n_g: float
    hausdorff_rms: float
    pd: float
    pt_given_h3: float
    confusion: dict[str, dict[str, float]]
    n_trials: int


def _rms(values: list[float]) -> float:
    if not values:
        return math.nan
    arr = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean(arr * arr)))


def scenario_metrics(
    outcomes: Sequence[ClassificationOutcome],
    true_hypotheses: Sequence[str],
    jammer_subsets: Iterable[int],
    target_subset: int,
) -> ScenarioMetrics:
    """Multi-object evaluation of classification outcomes.

    n_mj: RMS count of coherent-jammer subsets left unoccupied (over trials
    whose truth contains jammers).  n_g: RMS count of occupied subsets that
    match neither the target nor a jammer.  hausdorff_rms: RMS Hausdorff
    distance between true and estimated occupancy index sets (one-sided
    empties count as the number of subsets).  pd: fraction of passed
    likelihood tests over non-null truths.  pt_given_h3: fraction of trials
    declaring a target (H1 or H3) among H3 truths.  confusion maps truth ->
    declared -> probability.
    """
    if len(outcomes) != len(true_hypotheses):
        raise ValueError("outcomes and true_hypotheses must align")
    if not outcomes:
        raise ValueError("need at least one trial")
    jam = sorted(set(int(i) for i in jammer_subsets))
    n_subsets = outcomes[0].gamma_bar.size

    missed: list[float] = []
    ghosts: list[float] = []
    hausdorffs: list[float] = []
    passes: list[bool] = []
    target_declared_h3: list[bool] = []
    counts: dict[str, dict[str, int]] = {}
    totals: dict[str, int] = {}

    protected = set(jam) | {int(target_subset)}
    for outcome, truth in zip(outcomes, true_hypotheses):
        gamma = outcome.gamma_bar
        if truth in (H2, H3):
            missed.append(float(sum(1 for j in jam if gamma[j] == 0)))
        ghosts.append(float(sum(1 for i in np.flatnonzero(gamma) if int(i) not in protected)))
        if outcome.gamma_true is not None:
            hausdorffs.append(
                hausdorff(
                    np.flatnonzero(outcome.gamma_true),
                    np.flatnonzero(gamma),
                    empty_value=n_subsets,
                )
            )
        if truth != H00:
            passes.append(outcome.lrt_pass)
        if truth == H3:
            target_declared_h3.append(outcome.decided in (H1, H3))
        totals[truth] = totals.get(truth, 0) + 1
        row = counts.setdefault(truth, {})
        row[outcome.decided] = row.get(outcome.decided, 0) + 1

    confusion = {
        truth: {decided: row.get(decided, 0) / totals[truth] for decided in (H00, H1, H2, H3)}
        for truth, row in counts.items()
    }
    return ScenarioMetrics(
        n_mj=_rms(missed),
        n_g=_rms(ghosts),
        hausdorff_rms=_rms(hausdorffs),
        pd=float(np.mean(passes)) if passes else math.nan,
        pt_given_h3=float(np.mean(target_declared_h3)) if target_declared_h3 else math.nan,
        confusion=confusion,
        n_trials=len(outcomes),
    )
