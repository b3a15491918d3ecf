"""Exception taxonomy shared across the package.

Contract violations (bad arguments, malformed parameter blocks) raise
ContractError or its ShapeError subclass; numerical blow-ups during flow
evaluation raise NumericError; training aborts raise TrainingDivergedError;
configuration and generation problems get their own types so callers can
tell user error from bad luck apart.
"""

from __future__ import annotations


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class ShapeError(ContractError):
    """An array has the wrong shape or width for the operation."""


class ConfigError(ContractError):
    """A configuration file or config object is malformed."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values where finite ones are required."""


class TrainingDivergedError(NumericError):
    """Training hit a non-finite loss and cannot continue."""

    def __init__(self, message: str, batch_index: int | None = None) -> None:
        super().__init__(message)
        self.batch_index = batch_index


class GenerationError(RuntimeError):
    """A randomized generator failed to produce a valid object within its retry budget."""
