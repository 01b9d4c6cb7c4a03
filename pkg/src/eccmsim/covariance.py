"""Two-training-set structured covariance estimation.

Closed-form maximum-likelihood estimators: the clear-view (clutter-free)
covariance is obtained by keeping the top ``rank`` eigenvalues of the
scaled cross-spectrum and averaging the tail into a common noise floor;
the clutter component is then recovered by whitening the clutter-bearing
set with that estimate and clamping the excess eigenvalues at zero.  The
total CUT covariance estimate is their sum.  Only n_train_clear > rank is
required for invertibility, not n_train_clear > n_elements.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DegenerateCovarianceError(ValueError):
    """The estimated noise floor collapsed to zero; the estimate would be singular."""


_PSD_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Descending Hermitian eigendecomposition (values and unitary vectors)."""

    values: np.ndarray
    vectors: np.ndarray


def gram_eigensystem(data: np.ndarray) -> EigenSystem:
    """Eigendecomposition of data @ data^H, computed via the SVD of data.

    Returns all n eigenvalues (zero-padded when data has fewer columns than
    rows) in descending order with the matching unitary eigenvector basis.
    """
    u, s, _ = np.linalg.svd(data, full_matrices=True)
    values = np.zeros(data.shape[0])
    values[: s.size] = s * s
    return EigenSystem(values=values, vectors=u)


def hermitian_eigensystem(matrix: np.ndarray) -> EigenSystem:
    """Descending eigendecomposition of a Hermitian matrix."""
    w, v = np.linalg.eigh(matrix)
    return EigenSystem(values=w[::-1].copy(), vectors=v[:, ::-1].copy())


def _reconstruct(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    mat = (vectors * values) @ vectors.conj().T
    return 0.5 * (mat + mat.conj().T)


@dataclass(frozen=True)
class ClearCovEstimate:
    """Estimated clutter-free covariance with its spectral decomposition."""

    matrix: np.ndarray
    noise_power: float
    rank: int
    eigen: EigenSystem

    @cached_property
    def sqrt(self) -> np.ndarray:
        return _reconstruct(np.sqrt(self.eigen.values), self.eigen.vectors)

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        return _reconstruct(1.0 / np.sqrt(self.eigen.values), self.eigen.vectors)


@dataclass(frozen=True)
class ClutterCovEstimate:
    """Estimated clutter component and its clamped whitened eigenvalues."""

    matrix: np.ndarray
    clutter_eigs: np.ndarray


def clear_cov_from_eigensystem(
    eigen: EigenSystem, n_train: int, rank: int, loading: float = 0.0
) -> ClearCovEstimate:
    """Clear-view estimate from a precomputed cross-spectrum eigensystem.

    The top ``rank`` eigenvalues are kept (divided by n_train); the
    remaining ones are replaced by their average, which doubles as the
    noise-power estimate.  Trace is preserved exactly.  ``loading`` adds a
    diagonal stabilizer to the reconstructed estimate.
    """
    n = eigen.values.size
    if not 0 <= rank < n:
        raise ValueError(f"rank must lie in [0, {n - 1}], got {rank}")
    if n_train < 1:
        raise ValueError("n_train must be >= 1")
    if loading < 0.0:
        raise ValueError("loading must be >= 0")
    noise = float(eigen.values[rank:].sum()) / (n_train * (n - rank))
    if noise <= 0.0:
        raise DegenerateCovarianceError(
            f"trailing eigenvalues vanish for rank={rank} with n_train={n_train}; "
            "the noise-floor estimate is 0 (need n_train > rank)"
        )
    shrunk = np.concatenate([eigen.values[:rank] / n_train, np.full(n - rank, noise)])
    shrunk = shrunk + loading
    return ClearCovEstimate(
        matrix=_reconstruct(shrunk, eigen.vectors),
        noise_power=noise,
        rank=rank,
        eigen=EigenSystem(values=shrunk, vectors=eigen.vectors),
    )


def estimate_clear_cov(
    train_clear: np.ndarray, rank: int, loading: float = 0.0
) -> ClearCovEstimate:
    """Rank-constrained MLE of the clutter-free covariance.

    With rank=0 the estimate is (trace of the sample cross-spectrum)/(n*m)
    times the identity.  Raises DegenerateCovarianceError when the trailing
    eigenvalue mass is zero (adversarial n_train <= rank).
    """
    return clear_cov_from_eigensystem(
        gram_eigensystem(train_clear), train_clear.shape[1], rank, loading
    )


def _clear_estimate_from_matrix(clear_cov: np.ndarray) -> ClearCovEstimate:
    eigen = hermitian_eigensystem(clear_cov)
    if eigen.values[-1] <= _PSD_FLOOR * max(eigen.values[0], 1.0):
        raise ValueError("clear covariance must be positive definite")
    return ClearCovEstimate(
        matrix=clear_cov,
        noise_power=float(eigen.values[-1]),
        rank=0,
        eigen=eigen,
    )


def estimate_clutter_cov(
    train_clutter: np.ndarray, clear_cov: ClearCovEstimate | np.ndarray
) -> ClutterCovEstimate:
    """MLE of the clutter component given the clutter-free covariance.

    Whitens the clutter-bearing set with the symmetric inverse root of
    ``clear_cov``, clamps each whitened eigenvalue excess over the noise
    level at zero, and colors the result back.  The output is positive
    semidefinite by construction and zero when no eigenvalue exceeds the
    training count.
    """
    if isinstance(clear_cov, np.ndarray):
        clear_cov = _clear_estimate_from_matrix(clear_cov)
    k = train_clutter.shape[1]
    whitened = gram_eigensystem(clear_cov.inv_sqrt @ train_clutter)
    clamped = np.maximum(whitened.values / k - 1.0, 0.0)
    core = _reconstruct(clamped, whitened.vectors)
    matrix = clear_cov.sqrt @ core @ clear_cov.sqrt
    return ClutterCovEstimate(matrix=0.5 * (matrix + matrix.conj().T), clutter_eigs=clamped)


def estimate_cut_cov(
    train_clutter: np.ndarray,
    train_clear: np.ndarray,
    rank: int,
    loading: float = 0.0,
) -> np.ndarray:
    """Two-step estimate of the total CUT interference covariance.

    Composes the clear-view estimate for the given jammer-subspace rank
    with the clamped clutter estimate.  Requires n_train_clear > rank so
    the first step is invertible; works for n_train_clear < n_elements.
    """
    clear = estimate_clear_cov(train_clear, rank, loading)
    clutter = estimate_clutter_cov(train_clutter, clear)
    return clear.matrix + clutter.matrix
