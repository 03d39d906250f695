"""Shared exception types."""


class ContractError(ValueError):
    """An input violates a documented precondition (shape, range, emptiness)."""


class DegenerateInputError(ValueError):
    """Input is formally valid but degenerate (e.g. all points identical)."""


class NumericError(RuntimeError):
    """A numerical routine failed (factorization, eigensolver, rank deficiency)."""
