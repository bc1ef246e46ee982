"""Exception hierarchy.

Parsing, building, patching and fixture generation raise ``FirmwareError``
subclasses. The device-side checks (``verify``, ``verify_mac``) never raise
for bad input; they return verdicts instead.
"""


class FirmwareError(Exception):
    """Base class for toolkit errors on firmware artifacts."""


class ContainerError(FirmwareError):
    """AFW1 container is malformed or cannot be emitted."""


class TooShortError(ContainerError):
    """Input is shorter than the 48-byte header region."""


class BadTableVersionError(ContainerError):
    """Header ``table_ver`` is not 1."""


class BadTableLengthError(ContainerError):
    """Header ``table_len`` is not 44."""


class BoundsError(ContainerError):
    """An image's offset/length falls outside the file or overlaps another image."""


class DuplicateIdentifierError(ContainerError):
    """Both image entries carry the same identifier."""


class UnknownIdentifierError(ContainerError):
    """An image entry carries an identifier other than the one its slot requires."""


class InvariantViolationError(ContainerError):
    """A FirmwareUpdate value disagrees with its own header."""


class TooLargeError(ContainerError):
    """Container would exceed 2**32 - 1 bytes."""


class OutOfRangeError(FirmwareError):
    """Patch window does not fit inside the selected payload."""


class AlreadyTaggedError(FirmwareError):
    """Input already ends in a MAC trailer."""


class DoesNotFitError(FirmwareError):
    """Requested fixture content does not fit in the payload size."""


class AnalysisError(FirmwareError):
    """Invalid parameters for an analysis routine."""


class EmptyRangeError(AnalysisError):
    """Candidate base range contains no addresses."""


class ChannelError(Exception):
    """Base class for update-channel simulator errors."""


class ProtocolViolationError(ChannelError):
    """A tracker session frame arrived out of order or malformed."""


class UpstreamUnavailableError(ChannelError):
    """The interceptor could not reach the vendor server."""
