"""Jammer-subspace rank selection from the clutter-free training set.

Two routes: penalized-likelihood model order selection (AIC/BIC/GIC of the
compressed log-likelihood, with parameter count r*(2n - r) + 1) and a
heuristic that scans the scaled eigenvalue gaps from the noise tail upward
until one exceeds a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import gram_eigensystem

MOS_KINDS = ("aic", "bic", "gic")


@dataclass(frozen=True)
class MosRule:
    """Information criterion choice; gic_rho only applies to GIC."""

    kind: str
    gic_rho: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", self.kind.lower())
        if self.kind not in MOS_KINDS:
            raise ValueError(f"kind must be one of {MOS_KINDS}, got {self.kind!r}")
        if self.kind == "gic" and self.gic_rho < 1.0:
            raise ValueError("gic_rho must be >= 1")

    def penalty_factor(self, n_train: int) -> float:
        if self.kind == "aic":
            return 2.0
        if self.kind == "gic":
            return 1.0 + self.gic_rho
        return math.log(n_train)


@dataclass(frozen=True)
class RankEstimate:
    """Selected rank plus the per-candidate criterion values or gaps."""

    rank: int
    scores: np.ndarray


def param_count(rank: int, n_elements: int) -> int:
    """Free parameters of the rank-constrained clear-view covariance."""
    return rank * (2 * n_elements - rank) + 1


def compressed_loglik_from_eigs(eigenvalues: np.ndarray, n_train: int, rank: int) -> float:
    """Profile log-likelihood of the clear set at the rank-r estimate.

    ``eigenvalues`` are the descending eigenvalues of the sample
    cross-spectrum (not yet divided by n_train).  Returns -inf when the
    required eigenvalue mass vanishes (zero tail sum, or a zero kept
    eigenvalue for adversarial ranks beyond the sample rank).
    """
    n = eigenvalues.size
    if not 0 <= rank < n:
        raise ValueError(f"rank must lie in [0, {n - 1}], got {rank}")
    m = n_train
    tail_mean = float(eigenvalues[rank:].sum()) / (m * (n - rank))
    if tail_mean <= 0.0:
        return -math.inf
    head = eigenvalues[:rank] / m
    if rank and head[-1] <= 0.0:
        return -math.inf
    head_term = float(np.log(head).sum()) if rank else 0.0
    return -m * n * math.log(math.pi) - m * head_term - m * (n - rank) * math.log(tail_mean) - m * n


def compressed_loglik(train_clear: np.ndarray, rank: int) -> float:
    """Profile log-likelihood of the clutter-free training set for rank r."""
    eigen = gram_eigensystem(train_clear)
    return compressed_loglik_from_eigs(eigen.values, train_clear.shape[1], rank)


def mos_select_from_eigs(
    eigenvalues: np.ndarray, n_train: int, rule: MosRule, n_max: int
) -> RankEstimate:
    """Model-order selection over r in {0..n_max} given sample eigenvalues."""
    n = eigenvalues.size
    if not 1 <= n_max <= n - 1:
        raise ValueError(f"n_max must lie in [1, {n - 1}], got {n_max}")
    nu = rule.penalty_factor(n_train)
    scores = np.array(
        [
            -2.0 * compressed_loglik_from_eigs(eigenvalues, n_train, r) + param_count(r, n) * nu
            for r in range(n_max + 1)
        ]
    )
    # argmin returns the first minimizer, so ties break toward smaller rank.
    return RankEstimate(rank=int(np.argmin(scores)), scores=scores)


def mos_select(train_clear: np.ndarray, rule: MosRule, n_max: int) -> RankEstimate:
    """Select the jammer-subspace rank by penalized likelihood."""
    eigen = gram_eigensystem(train_clear)
    return mos_select_from_eigs(eigen.values, train_clear.shape[1], rule, n_max)


def eig_gap_select_from_eigs(scaled_eigenvalues: np.ndarray, threshold: float) -> RankEstimate:
    """Tail-first gap scan on eigenvalues already divided by n_train.

    Scans i = n-1 down to 1 and returns the first index whose gap
    ``scaled[i-1] - scaled[i]`` exceeds the threshold (0 when none does),
    i.e. the largest such index.  scores holds the n-1 gaps.
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be > 0")
    gaps = scaled_eigenvalues[:-1] - scaled_eigenvalues[1:]
    rank = 0
    for i in range(gaps.size, 0, -1):
        if gaps[i - 1] > threshold:
            rank = i
            break
    return RankEstimate(rank=rank, scores=gaps)


def eig_gap_select(train_clear: np.ndarray, threshold: float) -> RankEstimate:
    """Select the jammer-subspace rank by the eigenvalue-gap heuristic."""
    eigen = gram_eigensystem(train_clear)
    return eig_gap_select_from_eigs(eigen.values / train_clear.shape[1], threshold)
