"""Simulation toolkit for jammer-robust adaptive radar detection.

Covers scene synthesis with structured interference covariances,
two-training-set covariance estimation, jammer-subspace rank selection,
adaptive matched-filter detectors, sparse recovery with echo
classification, and a reproducible Monte Carlo harness.
"""

from .covariance import (
    ClearCovEstimate,
    ClutterCovEstimate,
    DegenerateCovarianceError,
    EigenSystem,
    estimate_clear_cov,
    estimate_clutter_cov,
    estimate_cut_cov,
    gram_eigensystem,
    hermitian_eigensystem,
)
from .detectors import DETECTOR_IDS, DetectorOutput, idt_amf, mf_statistic, scm_amf
from .harness import (
    ClassificationConfig,
    ClassificationResult,
    CurvePoint,
    ExperimentConfig,
    PdSweepResult,
    calibrate_threshold,
    calibrate_thresholds,
    derive_seed,
    emit_results,
    pd_sweep,
    read_results,
    run_classification_experiment,
    run_pd_experiment,
    sinr_at_pd,
    threshold_from_statistics,
)
from .rank_select import (
    MosRule,
    RankEstimate,
    compressed_loglik,
    eig_gap_select,
    mos_select,
    param_count,
)
from .scenario import (
    HYPOTHESES,
    ArrayGeometry,
    CovarianceModel,
    DataSet,
    JammerSpec,
    ScenarioConfig,
    amplitude_for_sinr,
    build_covariances,
    db_to_linear,
    draw_cut,
    linear_to_db,
    sinr_db,
    steering_vector,
    synthesize,
)
from .sparse import (
    AngleGrid,
    ClassificationOutcome,
    ScenarioMetrics,
    SparseEstimate,
    classify,
    hausdorff,
    lrt_statistic,
    scenario_metrics,
    select_q,
    slim_iterate,
    slim_objective,
    slim_trajectory,
)

__version__ = "0.1.0"
