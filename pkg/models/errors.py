"""
Exception hierarchy for the beable simulator.
"""

from typing import Optional


class BeableSimulationError(Exception):
    """Base class for all simulator errors."""


class ConfigError(BeableSimulationError, ValueError):
    """Invalid or inconsistent scenario / run configuration."""


class PreconditionError(BeableSimulationError, ValueError):
    """An operation was called outside its documented preconditions."""


class CausalOrderError(PreconditionError):
    """The detection plane lies in the causal past of the query point."""


class DegenerateGeometryError(PreconditionError):
    """Coincident points or a coordinate singularity (r = 0)."""


class QuadratureError(BeableSimulationError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: Optional[float] = None):
        super().__init__(message if error_estimate is None
                         else f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


class InconsistentRecordError(BeableSimulationError):
    """A detection record is inconsistent with every branch family."""


class ImpossibleOutcomeError(BeableSimulationError):
    """A post-selected final outcome has zero probability."""


class UnsupportedQueryError(BeableSimulationError, NotImplementedError):
    """A beable query falls outside what the closed-form evaluator covers."""
