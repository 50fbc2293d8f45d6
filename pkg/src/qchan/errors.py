"""Exception hierarchy shared by all qchan modules."""


class QchanError(Exception):
    """Base class for library errors."""


class DimensionError(QchanError, ValueError):
    pass


class NotHermitianError(QchanError, ValueError):
    pass


class ChannelError(QchanError, ValueError):
    """A Kraus set or Choi operator does not describe a valid channel."""


class BoundaryError(QchanError, ValueError):
    """A parameter point (or a finite-difference stencil) leaves the box."""


class ConditionError(QchanError, ValueError):
    """A channel family fails a structural condition required by an operation."""


class InvariantViolation(QchanError, AssertionError):
    """A runtime invariant of the protocol or metrology machinery failed."""


class InfiniteValueError(QchanError, ArithmeticError):
    """The requested quantity is +infinity because of a support mismatch.

    Raised instead of returning a large float so callers can tell
    "infinite" apart from "numerically big".
    """


class InfiniteDivergenceError(InfiniteValueError):
    pass


class InfiniteFisherError(InfiniteValueError):
    pass


class SpecError(QchanError, ValueError):
    """Malformed family specification file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class PovmError(QchanError, ValueError):
    """Effects are not PSD or do not sum to the identity."""
