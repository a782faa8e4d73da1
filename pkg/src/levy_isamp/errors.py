"""Exception hierarchy shared by all modules."""


class LevyISampError(Exception):
    """Base class for every error raised by this package."""


class DomainError(LevyISampError, ValueError):
    """A tilt parameter lies outside the effective domain of the CGF."""


class RangeError(LevyISampError, ValueError):
    """A time argument lies outside ``[0, T]``."""


class GridMismatch(LevyISampError, ValueError):
    """A required date is missing from a simulation grid."""


class ConfigError(LevyISampError, ValueError):
    """Invalid run configuration."""


class SolverError(LevyISampError, RuntimeError):
    """Base class for numerical solver failures."""


class NoInteriorPoint(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class BracketingFailure(SolverError):
    pass


class DomainExit(SolverError):
    """An ODE trajectory left the effective domain of the CGF."""


class DegenerateVariance(SolverError):
    """Importance-sampling variance vanished although the estimate did not."""
