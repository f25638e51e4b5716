"""EM-based estimation of effective connectivity."""
from .em import (
    EMConfig,
    EMStats,
    EstimationResult,
    MStepOptions,
    Theta,
    em_statistics,
    estimate,
    initialize,
    log_prior,
    m_step,
    objective,
    q_lower_bound,
)
from .sbl import SBLState, regression_design, regression_gram, sbl_update, sbl_update_gram
from .smoother import FilterResult, SmoothedMoments, kalman_filter, rts_smoother

__all__ = [
    "EMConfig", "EMStats", "EstimationResult", "MStepOptions", "Theta",
    "em_statistics", "estimate", "initialize", "log_prior", "m_step",
    "objective", "q_lower_bound", "SBLState", "regression_design",
    "regression_gram", "sbl_update", "sbl_update_gram", "FilterResult",
    "SmoothedMoments", "kalman_filter", "rts_smoother",
]
