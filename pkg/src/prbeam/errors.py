"""Exception hierarchy shared by all prbeam modules."""


class PrBeamError(Exception):
    """Base class for every error raised by prbeam."""


class InvalidArgument(PrBeamError, ValueError):
    pass


class IncompatibleGrid(PrBeamError, ValueError):
    """A pattern-only codebook was asked for angles it was not built on."""


class UnresolvableAngle(PrBeamError, KeyError):
    """A path angle has no column in a pattern-only beam pattern."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class InsufficientData(PrBeamError, ValueError):
    pass


class SequencingError(PrBeamError, ValueError):
    """Observations arrived out of step order."""


class InsufficientTrace(PrBeamError, ValueError):
    pass


class HorizonExceeded(PrBeamError, IndexError):
    pass


class DegenerateEnvironment(PrBeamError, ArithmeticError):
    """The normalizing denominator of a regret ratio vanished."""


class ConfigError(PrBeamError, ValueError):
    pass


class TraceFormatError(PrBeamError, ValueError):
    """A trace or pattern CSV does not match its schema."""
