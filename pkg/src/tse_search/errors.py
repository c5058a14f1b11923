"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Mismatched lengths, sample rates, or array dimensions."""


class DomainError(ValueError):
    """Scalar argument outside its admissible range."""


class WavFormatError(ValueError):
    """Malformed or unparseable RIFF/WAVE data."""


class UnsupportedChannelsError(WavFormatError):
    """WAV file is not mono."""


class UnsupportedEncodingError(WavFormatError):
    """WAV encoding other than 16-bit PCM or IEEE float32."""


class DegenerateReferenceError(ValueError):
    """Reference signal below the energy floor; SI-SDR undefined."""


class PreconditionError(ValueError):
    """An operation's stated precondition does not hold."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class MergeError(ValueError):
    """Reports cannot be merged (incompatible step counts)."""


class WorkerError(RuntimeError):
    """Base class for external-worker backend failures."""


class WorkerSpawnError(WorkerError):
    """Worker process could not be started."""


class WorkerProtocolError(WorkerError):
    """Worker sent bytes that violate the wire protocol."""


class WorkerTimeoutError(WorkerError):
    """Worker did not answer within the configured timeout."""


class WorkerCrashedError(WorkerError):
    """Worker exited before completing a request."""


class WorkerFailure(WorkerError):
    """Worker answered with an explicit error response."""
