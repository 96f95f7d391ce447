"""Default Bayes factors for testing variances.

One sample against a reference value, two samples, and equality or order
hypotheses over K groups.
"""

__version__ = "0.1.0"

from .data import BayesFactorResult, DeltaInterval, GroupStats, PriorSpec
from .elicitation import ElicitationTarget, delta_interval_prob, solve_alpha
from .errors import DomainError, NumericError, ParseError, ValidationError, VarBFError
from .hypotheses import HypothesisSpec, format_hypothesis, parse_hypothesis
from .kgroups import ChainConfig, EvidenceCache, log_bf
from .one_sample import OneSampleProblem, log_bf10_one, log_bf_directed_one
from .two_sample import log_bf10, log_bf_directed

__all__ = [
    "BayesFactorResult",
    "ChainConfig",
    "DeltaInterval",
    "DomainError",
    "ElicitationTarget",
    "EvidenceCache",
    "GroupStats",
    "HypothesisSpec",
    "NumericError",
    "OneSampleProblem",
    "ParseError",
    "PriorSpec",
    "ValidationError",
    "VarBFError",
    "delta_interval_prob",
    "format_hypothesis",
    "log_bf",
    "log_bf10",
    "log_bf10_one",
    "log_bf_directed",
    "log_bf_directed_one",
    "parse_hypothesis",
    "solve_alpha",
]
