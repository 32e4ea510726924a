"""Exception types shared across the package."""


class SpinCavityError(Exception):
    """Base class for all package-specific errors."""


class NegativeRate(SpinCavityError):
    """A decay rate that must be non-negative is negative."""


class NonPositiveFrequency(SpinCavityError):
    """A carrier frequency that must be positive is zero or negative."""


class QuadratureFailure(SpinCavityError):
    """A frequency integral did not reach the requested tolerance."""


class BadInterval(SpinCavityError):
    """Segment or pulse time ordering is inconsistent."""


class OutOfRange(SpinCavityError):
    """A time query lies outside the covered span."""


class StepTooLarge(SpinCavityError):
    """The time step is too coarse for the requested coupling strength."""


class NonFinite(SpinCavityError):
    """A computed amplitude left the finite range."""


class NoConvergence(SpinCavityError):
    """An iterative root search exhausted its iteration budget."""


class NotSplit(SpinCavityError):
    """Pole search was requested outside the strong-coupling regime."""


class InsufficientDecay(SpinCavityError):
    """Too little usable signal after switch-off to fit a decay rate."""


class NoOscillation(SpinCavityError):
    """Too few oscillation extrema to measure a period."""


class NotSteady(SpinCavityError):
    """A trajectory did not settle into the required steady regime."""


class ConfigError(SpinCavityError):
    """Base class for run-configuration problems."""


class ParseError(ConfigError):
    """The configuration file could not be read or parsed."""


class ValidationError(ConfigError):
    """The configuration violates a declared constraint."""
