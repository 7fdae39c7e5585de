"""clickprop: position-bias click propensity estimation for ranked search.

Estimates per-rank observation propensities from query-document pairs
that naturally changed ranks between impressions, validates the
estimates against a simulator with known ground truth, and turns
curves into inverse-propensity weights and bias-controlled evaluation
metrics.
"""

from .domain import (
    DEFAULT_KNOT_RANKS,
    DEFAULT_RANK_MAX,
    CurveMethod,
    EstimationReport,
    ImpressionRecord,
    KnotSpec,
    PairGroup,
    Platform,
    PropensityCurve,
    normalize_curve,
)
from .em import PositionBasedModelEM, em_fit
from .evaluate import (
    DEFAULT_FIXED_RANKS,
    EvalReport,
    EvalRow,
    ScoredImpression,
    bootstrap_compare,
    dcg,
    fixed_rank_auc,
    ipw_weight,
    read_scores_jsonl,
    unbiased_loss,
)
from .ingest import (
    ExtractionConfig,
    ExtractionSummary,
    LogParseError,
    SelectionMode,
    extract_pairs,
    group_pairs,
    parse_log,
    read_pairs_jsonl,
    select_estimation_pairs,
    write_impressions_jsonl,
    write_pairs_jsonl,
)
from .mle import LikelihoodEstimator, fit_mle, log_likelihood, log_likelihood_gradient
from .ratio import RatioEstimate, ratio_estimate, ratio_matrix
from .simulate import (
    RelevanceModel,
    SimConfig,
    simulate_candidate_groups,
    simulate_pairs,
    simulate_rank_pair_groups,
    true_curve,
    true_propensity,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_FIXED_RANKS",
    "DEFAULT_KNOT_RANKS",
    "DEFAULT_RANK_MAX",
    "CurveMethod",
    "EstimationReport",
    "EvalReport",
    "EvalRow",
    "ExtractionConfig",
    "ExtractionSummary",
    "ImpressionRecord",
    "KnotSpec",
    "LikelihoodEstimator",
    "LogParseError",
    "PairGroup",
    "Platform",
    "PositionBasedModelEM",
    "PropensityCurve",
    "RatioEstimate",
    "RelevanceModel",
    "ScoredImpression",
    "SelectionMode",
    "SimConfig",
    "bootstrap_compare",
    "dcg",
    "em_fit",
    "extract_pairs",
    "fit_mle",
    "fixed_rank_auc",
    "group_pairs",
    "ipw_weight",
    "log_likelihood",
    "log_likelihood_gradient",
    "normalize_curve",
    "parse_log",
    "ratio_estimate",
    "ratio_matrix",
    "read_pairs_jsonl",
    "read_scores_jsonl",
    "select_estimation_pairs",
    "simulate_candidate_groups",
    "simulate_pairs",
    "simulate_rank_pair_groups",
    "true_curve",
    "true_propensity",
    "unbiased_loss",
    "write_impressions_jsonl",
    "write_pairs_jsonl",
]
