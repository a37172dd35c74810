"""Achievable rates for multi-relay networks mixing decode-and-forward and
compress-and-forward relays."""

from .model import (
    DiscreteInput,
    DiscreteNetwork,
    GaussianInput,
    GaussianNetwork,
    InputSpec,
    RateReport,
    RelayAssignment,
    ResourceCapError,
    ValidationError,
    check,
    validate,
)
from .rates import (
    cf_joint_rate,
    cf_successive_rate,
    classic_single_relay_rates,
    decodable_sets,
    df_multilevel_rate,
    nnc_rate_subset,
    unified_rate_thm1,
    unified_rate_thm2,
    verify_theorem3,
)
from .schedule import build_schedule, effective_rate_fraction, verify_schedule
from .search import SearchConfig, enumerate_assignments, optimize_params, rank_strategies

__version__ = "0.1.0"

__all__ = [
    "DiscreteInput",
    "DiscreteNetwork",
    "GaussianInput",
    "GaussianNetwork",
    "InputSpec",
    "RateReport",
    "RelayAssignment",
    "ResourceCapError",
    "SearchConfig",
    "ValidationError",
    "build_schedule",
    "cf_joint_rate",
    "cf_successive_rate",
    "check",
    "classic_single_relay_rates",
    "decodable_sets",
    "df_multilevel_rate",
    "effective_rate_fraction",
    "enumerate_assignments",
    "nnc_rate_subset",
    "optimize_params",
    "rank_strategies",
    "unified_rate_thm1",
    "unified_rate_thm2",
    "validate",
    "verify_schedule",
    "verify_theorem3",
]
