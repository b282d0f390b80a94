"""Stationary and traveling wave profiles of follow-the-leader traffic.

Backward RK4 solves of the profile delay equation, boundary-value profiles as
limits of those solves, a platoon simulator and the diagnostics around them.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AssumptionError,
    ConfigError,
    DegenerateRateError,
    DomainError,
    FrameError,
    FtlError,
    HorizonError,
    InconsistencyError,
    InvariantError,
    NumericalError,
    PreconditionError,
    ProblemError,
    RootFindingError,
    StateError,
    StepSizeError,
    UnsupportedError,
)
from .model import ModelParams, VelocityLaw, check_assumptions, conjugate_density, conjugate_left, rho_star  # noqa: E402
from .rates import lambda_minus, lambda_plus, rate_report, verify_bounds  # noqa: E402
from .profile import ProfileCurve, RightTail, solve_backward  # noqa: E402
from .bvp import BvpProblem, StepProfile, solve_bvp, uniqueness_check  # noqa: E402
from .simulator import LeaderRule, Platoon, generate_distribution, measure_period, simulate, trace_error  # noqa: E402

__all__ = [
    "__version__",
    "AssumptionError",
    "BvpProblem",
    "ConfigError",
    "DegenerateRateError",
    "DomainError",
    "FrameError",
    "FtlError",
    "HorizonError",
    "InconsistencyError",
    "InvariantError",
    "LeaderRule",
    "ModelParams",
    "NumericalError",
    "Platoon",
    "PreconditionError",
    "ProblemError",
    "ProfileCurve",
    "RightTail",
    "RootFindingError",
    "StateError",
    "StepProfile",
    "StepSizeError",
    "UnsupportedError",
    "VelocityLaw",
    "check_assumptions",
    "conjugate_density",
    "conjugate_left",
    "generate_distribution",
    "lambda_minus",
    "lambda_plus",
    "measure_period",
    "rate_report",
    "rho_star",
    "simulate",
    "solve_backward",
    "solve_bvp",
    "trace_error",
    "uniqueness_check",
    "verify_bounds",
]
