"""Exception and warning types shared by all modules."""

from __future__ import annotations


class FracheatError(Exception):
    """Base class for errors raised by the package."""


class DomainError(FracheatError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UsageError(FracheatError, ValueError):
    """Inconsistent or malformed configuration supplied by the caller."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class AccuracyError(FracheatError, ArithmeticError):
    """A result could not be produced within the requested tolerance."""

    def __init__(self, message: str, bound: float):
        super().__init__(f"{message} (estimated error {bound:.3e})")
        self.bound = bound


class DivergenceError(FracheatError, ArithmeticError):
    """Non-finite values appeared while iterating."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node


class EstimatorWarning(UserWarning):
    """Something about a discrete estimate deserves attention (truncation, resolution, boundary mass)."""
