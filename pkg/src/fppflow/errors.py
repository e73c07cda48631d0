"""Exception types shared across modules (the CLI maps them to exit codes)."""


class PreconditionError(ValueError):
    """An operation was called outside its domain of validity."""


class InfeasibleError(RuntimeError):
    """No parameters satisfy the requested constraints."""
