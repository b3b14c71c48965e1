"""
Exception hierarchy shared by every module.
"""


class AvseError(Exception):
    """Base class for all domain errors."""


class InvalidInput(AvseError, ValueError):
    """An argument violates an operation's precondition."""


class UndefinedMetric(AvseError, ValueError):
    """A metric is mathematically undefined for the given input."""


class ShapeError(AvseError, ValueError):
    """Feature maps or spectrograms have incompatible shapes."""


class InsufficientInput(AvseError, ValueError):
    """A media window is shorter than the enhancer's input window."""


class ConfigError(AvseError, ValueError):
    """A configuration is invalid or internally inconsistent."""


class CodecError(AvseError, ValueError):
    """A compressed frame stream is malformed."""


class ProtocolError(AvseError):
    """
    A wire message could not be decoded.

    Attributes:
        skip: Number of bytes the caller should discard before retrying
    """

    def __init__(self, message: str, skip: int = 1):
        super().__init__(message)
        self.skip = max(1, skip)


class IncompleteLog(AvseError):
    """An event log is missing events for chunks that were not dropped."""

    def __init__(self, missing: list[int]):
        preview = ", ".join(str(s) for s in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        super().__init__(f"Incomplete events for chunks: {preview}{more}")
        self.missing = missing


class EmptyPlayback(AvseError):
    """An event log contains no played chunks."""


class CoherenceWarning(UserWarning):
    """Expected round-trip communication time exceeds the chunk duration."""
