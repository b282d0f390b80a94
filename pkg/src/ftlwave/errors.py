"""Exception hierarchy shared by all ftlwave modules."""

from __future__ import annotations


class FtlError(Exception):
    """Base class for every error raised by ftlwave."""


class DomainError(FtlError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class AssumptionError(FtlError, ValueError):
    """A velocity law violates the structural assumptions of the model."""


class RootFindingError(FtlError, ArithmeticError):
    """A bracketed root search had no sign change or did not converge."""


class NumericalError(FtlError, ArithmeticError):
    """NaN, divergence, or a failed inner iteration."""


class StepSizeError(NumericalError):
    """An invariant broke after a step; retry with a smaller step."""


class InvariantError(NumericalError):
    """A computed quantity left its admissible range."""


class StateError(FtlError, RuntimeError):
    """An operation was requested on an object in the wrong state."""


class InconsistencyError(FtlError, ArithmeticError):
    """Two quantities that must agree do not."""


class HorizonError(FtlError, RuntimeError):
    """The simulated horizon is too short for the requested measurement."""


class DegenerateRateError(FtlError, ValueError):
    """An exponential rate is undefined because the boundary state is degenerate.

    ``step_profile`` is set when the degeneracy means the only admissible
    profile is a step function.
    """

    def __init__(self, message: str, *, step_profile: bool = False) -> None:
        super().__init__(message)
        self.step_profile = step_profile


class ProblemError(FtlError, ValueError):
    """A boundary-value problem is ill-posed (e.g. non-conjugate states)."""


class UnsupportedError(FtlError, NotImplementedError):
    """The operation is only defined for a subset of velocity laws."""


class PreconditionError(FtlError, ValueError):
    """Input data violate the hypotheses of an experiment."""


class FrameError(FtlError, ValueError):
    """A moving-frame problem is not admissible."""


class ConfigError(FtlError, ValueError):
    """Invalid or incomplete run configuration."""
