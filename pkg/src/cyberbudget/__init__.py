"""Optimal partitioning of a cybersecurity budget across organizational sectors.

A knowledge base links mitigations to the attack techniques they stop and
to the sectors that fund them. Given attack sequences drawn from a hybrid
attack graph, the package selects mitigations and splits one unit of
budget over the sectors so that as few sequences as possible stay highly
likely to succeed.
"""

from .attack_model import (
    DEFAULT_SECTORS,
    DEFAULT_TACTICS,
    KnowledgeBase,
    Mitigation,
    Sector,
    Technique,
    build_mitigation_matrix,
    build_sector_matrix,
    validate_knowledge_base,
)
from .errors import (
    BudgetExceededError,
    ConfigError,
    CyberBudgetError,
    InfeasibleError,
    NumericalError,
    ParseError,
    SolverBugError,
    ValidationError,
)
from .hag import (
    AttackSequence,
    Hag,
    build_sequence_matrix,
    enumerate_sequences,
    filter_impact_sequences,
    generate_synthetic_hag,
)
from .milp import MilpModel, ProblemInstance, Solution, Status, build_model
from .oracle import exhaustive_optimum
from .scoring import ScoringParams, score
from .solver import SolverOptions, branch_and_bound, greedy_heuristic

__all__ = [
    "DEFAULT_SECTORS",
    "DEFAULT_TACTICS",
    "AttackSequence",
    "BudgetExceededError",
    "ConfigError",
    "CyberBudgetError",
    "Hag",
    "InfeasibleError",
    "KnowledgeBase",
    "MilpModel",
    "Mitigation",
    "NumericalError",
    "ParseError",
    "ProblemInstance",
    "ScoringParams",
    "Sector",
    "Solution",
    "SolverBugError",
    "SolverOptions",
    "Status",
    "Technique",
    "ValidationError",
    "branch_and_bound",
    "build_mitigation_matrix",
    "build_model",
    "build_sector_matrix",
    "build_sequence_matrix",
    "enumerate_sequences",
    "exhaustive_optimum",
    "filter_impact_sequences",
    "generate_synthetic_hag",
    "greedy_heuristic",
    "score",
    "validate_knowledge_base",
]
