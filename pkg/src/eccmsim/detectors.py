"""Matched-filter statistics and the composed adaptive detector pipelines.

The matched filter needs the true CUT covariance; the adaptive variants
plug in an estimate: the two-training-set pipeline (IDT-AMF, with the
jammer-subspace rank known or selected by AIC/BIC/GIC or the eigenvalue
gap) or the plain sample covariance of the clutter-bearing set (SCM-AMF,
the under-trained baseline, defined only for n_train_clutter >= n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .covariance import estimate_cut_cov
from .rank_select import MosRule, eig_gap_select, mos_select

MF = "MF"
SCM_AMF = "SCM-AMF"
IDT_AMF = "IDT-AMF"
IDT_AMF_AIC = "IDT-AMF-AIC"
IDT_AMF_BIC = "IDT-AMF-BIC"
IDT_AMF_GIC = "IDT-AMF-GIC"
IDT_AMF_EIG = "IDT-AMF-EIG"

DETECTOR_IDS = (MF, SCM_AMF, IDT_AMF, IDT_AMF_AIC, IDT_AMF_BIC, IDT_AMF_GIC, IDT_AMF_EIG)

RANK_METHODS = ("known", "aic", "bic", "gic", "eig")

_RANK_METHOD_TO_ID = {
    "known": IDT_AMF,
    "aic": IDT_AMF_AIC,
    "bic": IDT_AMF_BIC,
    "gic": IDT_AMF_GIC,
    "eig": IDT_AMF_EIG,
}


@dataclass(frozen=True)
class DetectorOutput:
    """One detector evaluation; decision is statistic > threshold."""

    statistic: float
    threshold: float
    decision: bool
    estimator_id: str
    r_hat: int | None = None


def mf_statistic(cut: np.ndarray, steering: np.ndarray, cov: np.ndarray) -> float:
    """Matched-filter statistic |z^H C^-1 v|^2 / (v^H C^-1 v).

    Raises ``scipy.linalg.LinAlgError`` when the covariance is not positive
    definite and ``ValueError`` for a zero steering vector.
    """
    factor = scipy.linalg.cho_factor(cov)
    weight = scipy.linalg.cho_solve(factor, steering)
    denom = float(np.real(np.vdot(steering, weight)))
    if denom <= 0.0:
        raise ValueError("steering vector must be nonzero")
    return float(abs(np.vdot(cut, weight)) ** 2) / denom


def idt_amf(
    cut: np.ndarray,
    train_clutter: np.ndarray,
    train_clear: np.ndarray,
    steering: np.ndarray,
    rank_method: str = "bic",
    *,
    rank: int | None = None,
    n_max: int | None = None,
    gic_rho: float = 2.0,
    eig_threshold: float = 10.0,
    loading: float = 0.0,
    threshold: float = math.inf,
) -> DetectorOutput:
    """Two-training-set adaptive matched filter.

    Selects the jammer-subspace rank (unless given via ``rank`` with
    rank_method="known"), forms the two-step CUT covariance estimate, and
    evaluates the matched-filter statistic against it.  ``n_max`` defaults
    to half the array size.
    """
    method = rank_method.lower()
    if method not in RANK_METHODS:
        raise ValueError(f"rank_method must be one of {RANK_METHODS}, got {rank_method!r}")
    n = cut.shape[0]
    if method == "known":
        if rank is None:
            raise ValueError("rank_method='known' requires rank")
        r_hat = int(rank)
    elif method == "eig":
        r_hat = eig_gap_select(train_clear, eig_threshold).rank
    else:
        r_hat = mos_select(train_clear, MosRule(method, gic_rho), n_max or n // 2).rank
    cov_hat = estimate_cut_cov(train_clutter, train_clear, r_hat, loading)
    stat = mf_statistic(cut, steering, cov_hat)
    return DetectorOutput(
        statistic=stat,
        threshold=threshold,
        decision=stat > threshold,
        estimator_id=_RANK_METHOD_TO_ID[method],
        r_hat=r_hat,
    )


def scm_amf(
    cut: np.ndarray,
    train_clutter: np.ndarray,
    steering: np.ndarray,
    threshold: float = math.inf,
) -> DetectorOutput:
    """Sample-covariance adaptive matched filter (under-trained baseline).

    Uses the plain sample covariance of the clutter-bearing set, which is
    singular below n training columns; such configurations are refused.
    """
    n, k = train_clutter.shape
    if k < n:
        raise ValueError(
            f"SCM-AMF needs at least {n} clutter-bearing training vectors, got {k}"
        )
    scm = train_clutter @ train_clutter.conj().T / k
    stat = mf_statistic(cut, steering, scm)
    return DetectorOutput(
        statistic=stat,
        threshold=threshold,
        decision=stat > threshold,
        estimator_id=SCM_AMF,
        r_hat=None,
    )
