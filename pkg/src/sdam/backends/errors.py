class BackendError(Exception):
    """Base class for backend failures surfaced to the pipeline."""


class TransportError(BackendError):
    """Network-level failure that persisted through retries."""


class SchemaError(BackendError, ValueError):
    """A request/response document violates the wire schema."""


class ProtocolError(BackendError):
    """A backend contract violation (preconditions, session ordering)."""
