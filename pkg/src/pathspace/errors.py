"""Exception types shared across the library."""


class PathspaceError(Exception):
    """Base class for all library errors."""


class NonGridTime(PathspaceError):
    """A time argument is not aligned with the sampling grid."""


class NonGridShift(NonGridTime):
    """A shift amount is not a multiple of the grid step."""


class WindowExcludesZero(PathspaceError):
    """An operation requiring time 0 was applied to a window not containing it."""


class PastNotStopped(PathspaceError):
    """``concat`` requires the past argument to be a fixed point of ``stop``."""


class DimensionMismatch(PathspaceError):
    """State points or paths with incompatible state dimensions."""


class KindMismatch(PathspaceError):
    """Operation requires a specific path kind (continuous vs cadlag)."""


class EmptyInterval(PathspaceError):
    """A time interval [a, b] with a >= b where a < b is required."""


class NotStopped(PathspaceError):
    """Operation requires stopped paths (x == stop(x))."""


class OutOfRange(PathspaceError):
    """A numeric argument is outside the admissible range."""


class NotInD0Domain(PathspaceError):
    """Observable is not in the derivation's domain (integral-algebra only)."""


class NonFiniteState(PathspaceError):
    """A simulated state exceeded the blow-up guard or became non-finite."""


class HorizonExceeded(PathspaceError):
    """An observable's window reaches beyond the configured simulation horizon."""


class NotPastDetermined(PathspaceError):
    """The semigroup acts on past-determined observables only."""


class PathsDisagreeAtZero(PathspaceError):
    """A path pair was required to share the same present value."""


class ConfigError(PathspaceError):
    """Invalid experiment configuration; carries a JSON-pointer-ish location."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")
