"""Error hierarchy shared by the numerical kernels, the CLI and the lab service."""


class LabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(LabError, ValueError):
    """An argument violates an operation's precondition."""


class BudgetExceededError(DomainError):
    """A requested enumeration exceeds the configured budget."""


class UndefinedValueError(LabError):
    """A statistic was queried before enough data was accumulated."""


class EvaluationError(LabError, ArithmeticError):
    """A functional could not be evaluated at the given point (e.g. G theta = 0)."""


class ConfigError(LabError):
    """An experiment configuration failed validation."""


def require(condition: bool, message: str) -> None:
    """
    Raise a DomainError carrying ``message`` unless ``condition`` holds.

    Args:
        condition: Precondition that must be true
        message: Description of the violated precondition

    Raises:
        DomainError: If the condition is false
    """
    if not condition:
        raise DomainError(message)
