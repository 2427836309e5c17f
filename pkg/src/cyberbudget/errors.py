"""Exception hierarchy shared by every module."""


class CyberBudgetError(Exception):
    """Base class for all package errors."""


class ValidationError(CyberBudgetError):
    """Input data violates a structural invariant."""


class ConfigError(CyberBudgetError):
    """Invalid run configuration or generator parameters."""


class ParseError(CyberBudgetError):
    """A model, HAG, or sequences file could not be parsed."""


class InfeasibleError(CyberBudgetError):
    """The optimization model has no feasible point."""


class SolverBugError(CyberBudgetError):
    """Solver output disagrees with the independent re-scoring."""


class NumericalError(CyberBudgetError):
    """Simplex pivot breakdown (tiny or non-finite pivot element)."""


class BudgetExceededError(CyberBudgetError):
    """Exhaustive enumeration would exceed its evaluation guard."""
