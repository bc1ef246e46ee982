"""Tracker session protocol: length-prefixed frames over TCP.

Every frame is ``u16 body_length`` followed by the body; the body starts
with an opcode. All integers are little-endian.

    PCD -> tracker                      tracker -> PCD
    0x01 BEGIN   u32 total_size         0x83 COMMIT-REPLY u8 verdict, u8 cause
    0x02 CHUNK   u8 len, payload        0x84 VERSION      u32 app, u32 boot
    0x03 COMMIT                         0xFF ERROR        u8 code
    0x04 VERSION?

BEGIN and CHUNK are not acknowledged; the tracker only answers COMMIT,
VERSION? and protocol violations. This is a minimal stand-in for the real
BLE transfer, which is undocumented.
"""

import dataclasses
import struct
from enum import IntEnum
from typing import BinaryIO

from trackerfw.errors import ProtocolViolationError
from trackerfw.firmware.container import ImageId
from trackerfw.firmware.verify import RejectCause, VerificationReport, Verdict

MAX_CHUNK = 20  # classic BLE ATT usable payload
MAX_BODY = 0xFFFF

_LENGTH = struct.Struct("<H")
_U32 = struct.Struct("<I")
_VERSIONS = struct.Struct("<II")
_COMMIT_REPLY = struct.Struct("<BB")


class Opcode(IntEnum):
    BEGIN = 0x01
    CHUNK = 0x02
    COMMIT = 0x03
    VERSION_QUERY = 0x04
    COMMIT_REPLY = 0x83
    VERSION_REPLY = 0x84
    ERROR = 0xFF


class ErrorCode(IntEnum):
    MALFORMED = 1
    CHUNK_WITHOUT_BEGIN = 2
    OVERFLOW = 3
    CHUNK_TOO_LARGE = 4
    COMMIT_WITHOUT_BEGIN = 5
    INCOMPLETE = 6


# (cause, image) <-> wire code
_CAUSE_CODES: dict[tuple[RejectCause, ImageId | None], int] = {
    (RejectCause.NONE, None): 0,
    (RejectCause.BAD_TABLE_VERSION, None): 1,
    (RejectCause.BAD_TABLE_LENGTH, None): 2,
    (RejectCause.TABLE_CHECKSUM_MISMATCH, None): 3,
    (RejectCause.IMAGE_CHECKSUM_MISMATCH, ImageId.APP): 4,
    (RejectCause.IMAGE_CHECKSUM_MISMATCH, ImageId.BOOT): 5,
    (RejectCause.BOUNDS_ERROR, None): 6,
    (RejectCause.MAC_MISSING, None): 7,
    (RejectCause.MAC_MISMATCH, None): 8,
}
_CODE_CAUSES = {code: key for key, code in _CAUSE_CODES.items()}


@dataclasses.dataclass(frozen=True)
class Begin:
    total_size: int


@dataclasses.dataclass(frozen=True)
class Chunk:
    payload: bytes


@dataclasses.dataclass(frozen=True)
class Commit:
    pass


@dataclasses.dataclass(frozen=True)
class VersionQuery:
    pass


@dataclasses.dataclass(frozen=True)
class VersionReply:
    app_version: int
    boot_version: int


@dataclasses.dataclass(frozen=True)
class CommitReply:
    verdict: Verdict
    cause: RejectCause
    image: ImageId | None = None

    @classmethod
    def from_report(cls, report: VerificationReport) -> "CommitReply":
        return cls(report.verdict, report.cause, report.image)


@dataclasses.dataclass(frozen=True)
class ErrorReply:
    code: ErrorCode


Request = Begin | Chunk | Commit | VersionQuery
Reply = VersionReply | CommitReply | ErrorReply


def encode(message: Request | Reply) -> bytes:
    """Encode a message body (without the length prefix)."""
    match message:
        case Begin(total_size):
            return bytes([Opcode.BEGIN]) + _U32.pack(total_size)
        case Chunk(payload):
            return bytes([Opcode.CHUNK, len(payload)]) + payload
        case Commit():
            return bytes([Opcode.COMMIT])
        case VersionQuery():
            return bytes([Opcode.VERSION_QUERY])
        case VersionReply(app_version, boot_version):
            return bytes([Opcode.VERSION_REPLY]) + _VERSIONS.pack(app_version, boot_version)
        case CommitReply(verdict, cause, image):
            verdict_code = 0 if verdict is Verdict.ACCEPT else 1
            return bytes([Opcode.COMMIT_REPLY]) + _COMMIT_REPLY.pack(
                verdict_code, _CAUSE_CODES[(cause, image)]
            )
        case ErrorReply(code):
            return bytes([Opcode.ERROR, code])
    raise TypeError(f"Cannot encode {message!r}")


def _expect_length(body: bytes, length: int) -> None:
    if len(body) != length:
        raise ProtocolViolationError(
            f"opcode 0x{body[0]:02x} body is {len(body)} bytes, expected {length}"
        )


def decode_request(body: bytes) -> Request:
    """Decode a PCD -> tracker frame body."""
    if not body:
        raise ProtocolViolationError("empty frame")
    opcode = body[0]
    if opcode == Opcode.BEGIN:
        _expect_length(body, 1 + _U32.size)
        return Begin(_U32.unpack_from(body, 1)[0])
    if opcode == Opcode.CHUNK:
        if len(body) < 2 or len(body) != 2 + body[1]:
            raise ProtocolViolationError("CHUNK length byte does not match payload")
        return Chunk(bytes(body[2:]))
    if opcode == Opcode.COMMIT:
        _expect_length(body, 1)
        return Commit()
    if opcode == Opcode.VERSION_QUERY:
        _expect_length(body, 1)
        return VersionQuery()
    raise ProtocolViolationError(f"unknown request opcode 0x{opcode:02x}")


def decode_reply(body: bytes) -> Reply:
    """Decode a tracker -> PCD frame body."""
    if not body:
        raise ProtocolViolationError("empty frame")
    opcode = body[0]
    if opcode == Opcode.VERSION_REPLY:
        _expect_length(body, 1 + _VERSIONS.size)
        app, boot = _VERSIONS.unpack_from(body, 1)
        return VersionReply(app, boot)
    if opcode == Opcode.COMMIT_REPLY:
        _expect_length(body, 1 + _COMMIT_REPLY.size)
        verdict_code, cause_code = _COMMIT_REPLY.unpack_from(body, 1)
        if cause_code not in _CODE_CAUSES or verdict_code not in (0, 1):
            raise ProtocolViolationError(f"bad COMMIT-REPLY {verdict_code}/{cause_code}")
        cause, image = _CODE_CAUSES[cause_code]
        return CommitReply(Verdict.ACCEPT if verdict_code == 0 else Verdict.REJECT, cause, image)
    if opcode == Opcode.ERROR:
        _expect_length(body, 2)
        try:
            return ErrorReply(ErrorCode(body[1]))
        except ValueError:
            raise ProtocolViolationError(f"unknown error code {body[1]}") from None
    raise ProtocolViolationError(f"unknown reply opcode 0x{opcode:02x}")


def frame(body: bytes) -> bytes:
    """Prefix a body with its u16 length."""
    if len(body) > MAX_BODY:
        raise ProtocolViolationError(f"frame body of {len(body)} bytes exceeds {MAX_BODY}")
    return _LENGTH.pack(len(body)) + body


def read_frame(stream: BinaryIO) -> bytes | None:
    """Read one frame body; None on a clean end of stream."""
    prefix = stream.read(_LENGTH.size)
    if not prefix:
        return None
    if len(prefix) < _LENGTH.size:
        raise ProtocolViolationError("stream ended inside a length prefix")
    (length,) = _LENGTH.unpack(prefix)
    body = stream.read(length)
    if len(body) < length:
        raise ProtocolViolationError("stream ended inside a frame body")
    return body
