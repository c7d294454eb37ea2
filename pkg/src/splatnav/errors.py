"""Exception types shared across the library."""


class SplatNavError(Exception):
    """Base class for all library errors."""


class SceneFormatError(SplatNavError):
    """A scene file could not be parsed."""


class SceneVersionError(SceneFormatError):
    """A scene file declares an unsupported format version."""


class SceneValidationError(SplatNavError):
    """A parsed scene violates an invariant; the message names the field."""


class DegenerateInputError(SplatNavError):
    """Geometric input is too degenerate for the requested construction."""


class UnreachableError(SplatNavError):
    """No path exists between the requested endpoints."""


class InvalidEndpointError(SplatNavError):
    """A planning endpoint falls on a blocked or out-of-bounds cell."""


class ExhaustionError(SplatNavError):
    """Sampling gave up after the configured number of attempts."""


class UnknownNameError(SplatNavError):
    """A referenced object/room name is not part of the scene."""


class EpisodeFinishedError(SplatNavError):
    """step() was called on an environment whose episode already ended."""


class TransportError(SplatNavError):
    """An external service could not be reached."""


class ResponseSchemaError(SplatNavError):
    """An external service reply failed schema validation after retries."""


class EmptyResultError(SplatNavError):
    """An external service produced no usable entries."""


class ProtocolError(SplatNavError):
    """A wire-protocol peer sent a malformed or out-of-order message."""
