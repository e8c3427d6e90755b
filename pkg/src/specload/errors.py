"""Exception types shared across the toolkit."""


class SpecloadError(Exception):
    """Base class for errors raised by this package."""


class MalformedUrl(SpecloadError, ValueError):
    """A URL could not be parsed into scheme + host."""


class SchemaError(SpecloadError, ValueError):
    """A trace or fixture record violates the expected schema.

    ``line`` is the 1-based line number when the record came from a file.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidParams(SpecloadError, ValueError):
    """Generator or simulator parameters are out of range."""


class EmptyTrace(SpecloadError, ValueError):
    """An operation that needs at least one visit got none."""


class EmptyWindow(SpecloadError, ValueError):
    """A training window contains no visits."""


class InsufficientTrace(SpecloadError, ValueError):
    """The trace does not span enough time for the requested evaluation."""


class CorruptRepository(SpecloadError, ValueError):
    """A serialized metadata repository failed validation on load."""


class BadSpec(SpecloadError, ValueError):
    """A fixture server spec file is malformed."""


class PortInUse(SpecloadError, OSError):
    """The port requested for the fixture server is already bound."""


class MainResourceFailed(SpecloadError, RuntimeError):
    """The main resource of a live page load could not be fetched."""

    def __init__(self, url: str, reason: str):
        super().__init__(f"main resource failed: {url}: {reason}")
        self.url = url
        self.reason = reason
