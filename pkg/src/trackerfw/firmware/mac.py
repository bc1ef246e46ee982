"""MAC countermeasure: HMAC-SHA-256 over the serialized container, carried as a trailer.

The trailer is appended after the last payload byte::

    "MAC1" (4 bytes) | HMAC-SHA-256(key, container) (32 bytes)

Checksum-only devices never look past the payloads, so tagged files stay
byte-compatible with them. Every tracker holds its own 32-byte key.
"""

import dataclasses
import logging
from enum import Enum
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives import hmac as hmac_cls

from trackerfw.errors import AlreadyTaggedError

logger = logging.getLogger(__name__)

MAC_MAGIC = b"MAC1"
TAG_SIZE = 32
TRAILER_SIZE = len(MAC_MAGIC) + TAG_SIZE
KEY_SIZE = 32


class MacStatus(str, Enum):
    """Outcome of ``verify_mac``; values double as CLI exit codes via ``exit_code``."""

    VALID = "Valid"
    MISSING = "Missing"
    MISMATCH = "Mismatch"

    @property
    def exit_code(self) -> int:
        return {MacStatus.VALID: 0, MacStatus.MISSING: 1, MacStatus.MISMATCH: 2}[self]


@dataclasses.dataclass(frozen=True)
class MacTrailer:
    """Detachable authentication trailer."""

    tag: bytes
    magic: bytes = MAC_MAGIC

    def pack(self) -> bytes:
        return self.magic + self.tag

    @staticmethod
    def unpack(trailer: bytes) -> "MacTrailer":
        split = len(MAC_MAGIC)
        return MacTrailer(tag=bytes(trailer[split:]), magic=bytes(trailer[:split]))


def hmac_sha256(key: bytes, data: bytes) -> bytes:
    """HMAC-SHA-256 of ``data`` under ``key`` (any key length, per RFC 2104)."""
    hmac_obj = hmac_cls.HMAC(key, hashes.SHA256())
    hmac_obj.update(data)
    return hmac_obj.finalize()


def _check_key(key: bytes) -> None:
    if len(key) != KEY_SIZE:
        raise ValueError(f"MAC key must be {KEY_SIZE} bytes, got {len(key)}")


def split_trailer(data: bytes) -> tuple[bytes, MacTrailer | None]:
    """Split ``data`` into (container, trailer), trailer being None when absent."""
    if len(data) >= TRAILER_SIZE and data[-TRAILER_SIZE:-TAG_SIZE] == MAC_MAGIC:
        return bytes(data[:-TRAILER_SIZE]), MacTrailer.unpack(data[-TRAILER_SIZE:])
    return bytes(data), None


def attach_mac(container: bytes, key: bytes) -> bytes:
    """Append a MAC trailer authenticating ``container``.

    Raises:
        AlreadyTaggedError: ``container`` already ends in a trailer.
        ValueError: ``key`` is not 32 bytes.
    """
    _check_key(key)
    if split_trailer(container)[1] is not None:
        raise AlreadyTaggedError("input already ends in a MAC1 trailer")
    trailer = MacTrailer(tag=hmac_sha256(key, container))
    logger.debug(f"Attached MAC trailer to {len(container)}-byte container")
    return bytes(container) + trailer.pack()


def verify_mac(data: bytes, key: bytes) -> MacStatus:
    """Check the trailer of ``data`` against ``key`` with a constant-time comparison."""
    _check_key(key)
    container, trailer = split_trailer(data)
    if trailer is None:
        return MacStatus.MISSING
    hmac_obj = hmac_cls.HMAC(key, hashes.SHA256())
    hmac_obj.update(container)
    try:
        hmac_obj.verify(trailer.tag)
    except InvalidSignature:
        logger.debug("MAC trailer does not match container")
        return MacStatus.MISMATCH
    return MacStatus.VALID


def parse_key(text: str) -> bytes:
    """Decode a hex key (whitespace and an optional ``0x`` prefix allowed)."""
    cleaned = "".join(text.split())
    if cleaned.lower().startswith("0x"):
        cleaned = cleaned[2:]
    try:
        key = bytes.fromhex(cleaned)
    except ValueError as e:
        raise ValueError(f"MAC key is not valid hex: {e}") from None
    _check_key(key)
    return key


def read_key_file(path: str | Path) -> bytes:
    """Load a 32-byte key stored as hex text."""
    return parse_key(Path(path).read_text())
