"""Exception hierarchy shared by all modules."""


class MbesegError(Exception):
    """Base class for every error raised by the package."""


class GridError(MbesegError, ValueError):
    """Field has the wrong rank, a dimension below 2, or mismatched shapes."""


class ParameterError(MbesegError, ValueError):
    """A numerical parameter is outside its admissible range."""


class DegenerateInitError(MbesegError, ValueError):
    """Initial shape covers none or all of the grid."""


class NonPositiveEnergyError(MbesegError, ArithmeticError):
    """The shifted lower-order energy E1 is not strictly positive."""


class SchemeInstabilityError(MbesegError, ValueError):
    """The semi-implicit left-hand side symbol is not positive."""


class DivergenceError(MbesegError, ArithmeticError):
    """The level-set function became non-finite or exceeded the blow-up bound.

    ``iteration`` is the index of the step that produced the bad state and
    ``trace`` (when set by the driver) holds the rows recorded so far.
    """

    def __init__(self, message, iteration, trace=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


class FixtureError(MbesegError, ValueError):
    """Synthetic fixture geometry is degenerate or out of bounds."""


class MaskError(MbesegError, ValueError):
    """A mask is not binary or masks have different shapes."""


class ConfigError(MbesegError, ValueError):
    """Invalid run configuration; message names the offending key."""


class ImageFormatError(MbesegError, ValueError):
    """Unsupported image file (colour, unknown format, bad header)."""
