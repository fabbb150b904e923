"""Exceptions shared across modules; the CLI maps them to exit codes."""


class BudgetExceeded(RuntimeError):
    """A computation would exceed its configured work budget."""


class InvariantViolation(AssertionError):
    """A checked mathematical identity failed on a concrete instance."""


class EvaluationError(ValueError):
    """A formula cannot be evaluated on a structure (unbound variable, unknown symbol, ...)."""
