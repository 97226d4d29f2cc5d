"""Exception hierarchy shared across the package.

Every failure mode callers are expected to handle has its own type so the
CLI can map errors to exit codes without string matching.
"""

from __future__ import annotations


class AllocBenchError(Exception):
    """Base class for all package errors."""


class ParseError(AllocBenchError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(AllocBenchError):
    """Structurally valid input that violates a documented contract."""


class InsufficientDataError(AllocBenchError):
    """Not enough rows for the requested window, split, or estimate."""


class InfeasibleError(AllocBenchError):
    """Constraint set is empty, e.g. an unattainable target return."""


class NumericalError(AllocBenchError):
    """Singular or non-positive-definite system encountered by a solver."""


class ConvergenceError(AllocBenchError):
    """Iteration cap hit before tolerance. Carries the final residual."""

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class NoTangencyError(AllocBenchError):
    """No asset earns more than the risk-free rate, so no tangency exists."""


class UndefinedMetricError(AllocBenchError):
    """Metric is mathematically undefined for the given series."""


class EpisodeEndedError(AllocBenchError):
    """step() called on a terminal environment state."""


class TrainingDivergedError(AllocBenchError):
    """A training loss went non-finite or exploded. Carries seed and step."""

    def __init__(self, message: str, step: int, seed: int):
        super().__init__(f"{message} (seed {seed}, step {step})")
        self.step = step
        self.seed = seed


class UsageError(AllocBenchError):
    """Invalid command-line invocation."""
