"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: InputError (and ValueError) -> 1,
TransportError and subclasses -> 2, anything else -> 3.
"""


class InputError(ValueError):
    """Bad user input: malformed URL, missing field, violated precondition."""


class CorpusError(InputError):
    """Malformed corpus/manifest file. Message names the offending line."""


class TransportError(RuntimeError):
    """Backend endpoint unreachable or connection lost mid-request."""


class BackendError(TransportError):
    """Backend answered ok=false; carries the backend's message."""


class ProtocolError(TransportError):
    """Backend reply violates the wire contract (bad id, wrong shape)."""
