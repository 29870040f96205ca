"""Exception hierarchy shared across the package."""


class GancodecError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GancodecError, ValueError):
    """Invalid network, quantizer or experiment configuration."""


class ShapeError(GancodecError, ValueError):
    """Array dimensions violate an operation's precondition."""


class NumericError(GancodecError, ArithmeticError):
    """Non-finite values appeared in a forward pass or a loss."""


class FormatError(GancodecError, ValueError):
    """Malformed bitstream or out-of-range code."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class CodecUnavailableError(GancodecError, RuntimeError):
    """An external image codec is not installed or not reachable."""


class CodecToolError(GancodecError, RuntimeError):
    """An external image codec failed while encoding or decoding."""


class UnreachableTargetError(GancodecError, ValueError):
    """Requested bitrate lies outside what a codec can produce."""

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class DatasetError(GancodecError, ValueError):
    """Dataset is empty, unreadable, or image/label pairing is broken."""


class UndefinedMetricError(GancodecError, ValueError):
    """A metric is undefined for the given input (e.g. no classes present)."""
