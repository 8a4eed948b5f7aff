"""Rate-distortion diversity measures, DPP selection, and bi-modal scheduling."""

from .dpp import GreedyResult, PsdKernel, dpp_normalizer, exact_map, gram_kernel, greedy_map, subset_log_det
from .errors import (
    ConfigurationError,
    DegenerateModelError,
    EmptyClassError,
    InstanceTooLargeError,
    InvalidArgumentError,
    InvalidInputError,
    NumericalError,
    ParseError,
    RddppError,
)
from .ratedist import (
    FeatureMatrix,
    RateConfig,
    class_conditional_rate,
    coding_rate,
    hadamard_upper_bound,
    semantic_diversity,
)
from .selection import (
    CandidatePool,
    Mode,
    QDKernel,
    QualityMode,
    QualityScorer,
    SchedulerConfig,
    SelectionReport,
    SelectionState,
    Strategy,
    UncertaintyMode,
    build_qd_kernel,
    min_margin,
    quality_score,
    run_bimodal,
    run_selection,
    select_dpp_coreset,
    select_k_center,
    select_marginal_rate_gain,
    select_random,
    select_round_diversity,
    select_round_uncertainty,
    uncertainty_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "CandidatePool",
    "ConfigurationError",
    "DegenerateModelError",
    "EmptyClassError",
    "FeatureMatrix",
    "GreedyResult",
    "InstanceTooLargeError",
    "InvalidArgumentError",
    "InvalidInputError",
    "Mode",
    "NumericalError",
    "ParseError",
    "PsdKernel",
    "QDKernel",
    "QualityMode",
    "QualityScorer",
    "RateConfig",
    "RddppError",
    "SchedulerConfig",
    "SelectionReport",
    "SelectionState",
    "Strategy",
    "UncertaintyMode",
    "build_qd_kernel",
    "class_conditional_rate",
    "coding_rate",
    "dpp_normalizer",
    "exact_map",
    "gram_kernel",
    "greedy_map",
    "hadamard_upper_bound",
    "min_margin",
    "quality_score",
    "run_bimodal",
    "run_selection",
    "select_dpp_coreset",
    "select_k_center",
    "select_marginal_rate_gain",
    "select_random",
    "select_round_diversity",
    "select_round_uncertainty",
    "semantic_diversity",
    "subset_log_det",
    "uncertainty_entropy",
]
