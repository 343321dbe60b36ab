"""Exception types shared across the toolkit.

Each failure mode named by a module contract gets its own class so callers
can discriminate without parsing messages.
"""


class SepfuseError(Exception):
    """Base class for all toolkit errors."""


# --- audio I/O ---

class UnreadableFileError(SepfuseError):
    """File could not be opened or read from disk."""


class UnsupportedEncodingError(SepfuseError):
    """File is not a WAV container we accept (16-bit int / 32-bit float PCM, 1-2 ch)."""


class ZeroLengthAudioError(SepfuseError):
    """WAV file decoded to zero samples."""


class UnwritableFileError(SepfuseError):
    """Output path could not be created or written."""


# --- signal contracts ---

class RateMismatchError(SepfuseError):
    """Operands carry different sample rates."""


class LengthMismatchError(SepfuseError):
    """Operands must have equal sample counts."""


class ShortSignalError(SepfuseError):
    """Signal shorter than one analysis window."""


class SilentSignalError(SepfuseError):
    """Operation undefined on zero-energy input (SNR/SDR denominators)."""


# --- routing ---

class RouteParseError(SepfuseError):
    """External router reply was not one of the canonical modality labels."""


# --- adapter wire protocol ---

class AdapterError(SepfuseError):
    """Base class for adapter transport/protocol failures."""


class AdapterTimeoutError(AdapterError):
    """No response line within the endpoint's timeout."""


class AdapterProtocolError(AdapterError):
    """Response line was malformed or violated the message schema."""


class AdapterIdMismatchError(AdapterError):
    """Response id did not echo the request id."""


class AdapterRemoteError(AdapterError):
    """Adapter answered with an error object instead of a result."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


# --- dataset construction ---

class EmptyPoolError(SepfuseError):
    """No interferer of the required modality available in the source manifest."""


class ManifestError(SepfuseError):
    """Manifest row missing required fields or referencing unreadable stems."""
