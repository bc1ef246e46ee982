"""AFW1 firmware container: two images ("app" and "bootloader") behind a header table.

Layout, all integers little-endian (the target is a Cortex-M0)::

    off  size  field
    0    2     table_ver (=1)
    2    2     table_len (=44)
    4    20    images[0]: identifier u16, reserved u16, offset u32,
                          length u32, checksum u32, version u32
    24   20    images[1]: same layout
    44   4     table_checksum = CRC32(bytes[0..44))
    48   ...   app payload, then bootloader payload

``parse_update`` only checks structure. Checksums are the verifier's job,
mirroring the split between the analyst's tooling and the device.
"""

import dataclasses
import logging
import struct
from enum import IntEnum
from typing import Any

from trackerfw.errors import (
    BadTableLengthError,
    BadTableVersionError,
    BoundsError,
    DuplicateIdentifierError,
    InvariantViolationError,
    TooLargeError,
    TooShortError,
    UnknownIdentifierError,
)
from trackerfw.firmware.checksum import crc32

logger = logging.getLogger(__name__)

TABLE_VERSION = 1
TABLE_LEN = 44
HEADER_SIZE = 48  # table plus the trailing table_checksum
U32_MAX = 0xFFFFFFFF

_PREFIX = struct.Struct("<HH")
_ENTRY = struct.Struct("<HHIIII")
_TABLE_CHECKSUM = struct.Struct("<I")


class ImageId(IntEnum):
    """Image role tag stored in ``ImageEntry.identifier``."""

    APP = 1
    BOOT = 2

    @property
    def label(self) -> str:
        return "app" if self is ImageId.APP else "boot"

    @classmethod
    def from_label(cls, label: str) -> "ImageId":
        try:
            return {"app": cls.APP, "boot": cls.BOOT, "bootloader": cls.BOOT}[label.lower()]
        except KeyError:
            raise ValueError(f"Unknown image {label!r}, expected 'app' or 'boot'") from None


# Slot order is fixed: app first, bootloader second.
SLOT_ORDER = (ImageId.APP, ImageId.BOOT)


@dataclasses.dataclass(frozen=True)
class ImageEntry:
    """Per-image descriptor in the header table."""

    SIZE = _ENTRY.size

    identifier: int
    reserved: int
    offset: int
    length: int
    checksum: int
    version: int

    def pack(self) -> bytes:
        return _ENTRY.pack(
            self.identifier, self.reserved, self.offset, self.length, self.checksum, self.version
        )

    @staticmethod
    def unpack(buffer: bytes, offset: int) -> "ImageEntry":
        return ImageEntry(*_ENTRY.unpack_from(buffer, offset))

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclasses.dataclass(frozen=True)
class UpdateHeader:
    """Header table plus its checksum."""

    table_ver: int
    table_len: int
    images: tuple[ImageEntry, ImageEntry]
    table_checksum: int

    def pack_table(self) -> bytes:
        """The ``table_len`` bytes covered by ``table_checksum``."""
        return _PREFIX.pack(self.table_ver, self.table_len) + b"".join(
            entry.pack() for entry in self.images
        )

    def pack(self) -> bytes:
        return self.pack_table() + _TABLE_CHECKSUM.pack(self.table_checksum)

    def entry(self, which: ImageId) -> ImageEntry:
        return self.images[SLOT_ORDER.index(which)]

    def with_entry(self, which: ImageId, entry: ImageEntry) -> "UpdateHeader":
        images = list(self.images)
        images[SLOT_ORDER.index(which)] = entry
        return dataclasses.replace(self, images=(images[0], images[1]))


@dataclasses.dataclass(frozen=True)
class FirmwareUpdate:
    """A parsed update file: header table and the two image payloads."""

    header: UpdateHeader
    app_payload: bytes
    boot_payload: bytes

    def payload(self, which: ImageId) -> bytes:
        return self.app_payload if which is ImageId.APP else self.boot_payload

    def entry(self, which: ImageId) -> ImageEntry:
        return self.header.entry(which)

    def with_payload(self, which: ImageId, payload: bytes) -> "FirmwareUpdate":
        if which is ImageId.APP:
            return dataclasses.replace(self, app_payload=payload)
        return dataclasses.replace(self, boot_payload=payload)

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.app_payload) + len(self.boot_payload)


def _check_identifiers(images: tuple[ImageEntry, ImageEntry]) -> None:
    identifiers = [entry.identifier for entry in images]
    for slot, identifier in enumerate(identifiers):
        if identifier not in (ImageId.APP, ImageId.BOOT):
            raise UnknownIdentifierError(f"images[{slot}] has unknown identifier {identifier}")
    if identifiers[0] == identifiers[1]:
        raise DuplicateIdentifierError(f"both images carry identifier {identifiers[0]}")
    for slot, (identifier, expected) in enumerate(zip(identifiers, SLOT_ORDER)):
        if identifier != expected:
            raise UnknownIdentifierError(
                f"images[{slot}] has identifier {identifier}, slot requires "
                f"{expected.label} ({int(expected)})"
            )


def _check_bounds(images: tuple[ImageEntry, ImageEntry], file_size: int) -> None:
    for slot, entry in enumerate(images):
        if entry.offset < HEADER_SIZE:
            raise BoundsError(f"images[{slot}] offset {entry.offset} overlaps the header")
        if entry.end > file_size:
            raise BoundsError(
                f"images[{slot}] spans [{entry.offset}, {entry.end}) beyond file size {file_size}"
            )
    first, second = images
    if first.offset < second.end and second.offset < first.end:
        raise BoundsError(
            f"image payloads overlap: [{first.offset}, {first.end}) and "
            f"[{second.offset}, {second.end})"
        )


def parse_update(data: bytes) -> FirmwareUpdate:
    """Parse an AFW1 file without validating any checksum.

    Bytes not covered by either payload (for example a MAC trailer after the
    last payload) are ignored.

    Args:
        data: Raw file contents.

    Returns:
        Structurally valid FirmwareUpdate.

    Raises:
        ContainerError: One of the structural checks failed.
    """
    if len(data) < HEADER_SIZE:
        raise TooShortError(f"{len(data)} bytes, header alone needs {HEADER_SIZE}")

    table_ver, table_len = _PREFIX.unpack_from(data, 0)
    if table_ver != TABLE_VERSION:
        raise BadTableVersionError(f"table_ver is {table_ver}, expected {TABLE_VERSION}")
    if table_len != TABLE_LEN:
        raise BadTableLengthError(f"table_len is {table_len}, expected {TABLE_LEN}")

    images = (
        ImageEntry.unpack(data, _PREFIX.size),
        ImageEntry.unpack(data, _PREFIX.size + ImageEntry.SIZE),
    )
    (table_checksum,) = _TABLE_CHECKSUM.unpack_from(data, table_len)

    _check_identifiers(images)
    _check_bounds(images, len(data))

    app, boot = images
    header = UpdateHeader(table_ver, table_len, images, table_checksum)
    return FirmwareUpdate(
        header=header,
        app_payload=bytes(data[app.offset : app.end]),
        boot_payload=bytes(data[boot.offset : boot.end]),
    )


def serialize_update(update: FirmwareUpdate) -> bytes:
    """Emit the canonical byte layout of ``update``.

    Header at 0, table checksum at 44, app payload at 48 and the bootloader
    payload right after it. The header must already describe exactly that
    layout; nothing is recomputed here.

    Raises:
        InvariantViolationError: Header and payloads disagree.
    """
    header = update.header
    if header.table_len != TABLE_LEN:
        raise InvariantViolationError(f"table_len is {header.table_len}, layout needs {TABLE_LEN}")
    _check_identifiers(header.images)

    expected_offset = HEADER_SIZE
    for which in SLOT_ORDER:
        entry = header.entry(which)
        payload = update.payload(which)
        if entry.length != len(payload):
            raise InvariantViolationError(
                f"{which.label} length field is {entry.length} but payload has {len(payload)} bytes"
            )
        if entry.offset != expected_offset:
            raise InvariantViolationError(
                f"{which.label} offset field is {entry.offset}, canonical layout puts it at "
                f"{expected_offset}"
            )
        expected_offset += entry.length

    return header.pack() + update.app_payload + update.boot_payload


def table_checksum_of(header: UpdateHeader) -> int:
    """CRC-32 over the header table, i.e. what ``table_checksum`` should hold."""
    return crc32(header.pack_table())


def build_update(app: bytes, boot: bytes, app_version: int, boot_version: int) -> FirmwareUpdate:
    """Build a self-consistent update with contiguous payloads and correct checksums.

    Raises:
        TooLargeError: The file would not be addressable with 32-bit offsets.
        InvariantViolationError: A version does not fit in 32 bits.
    """
    for name, version in (("app_version", app_version), ("boot_version", boot_version)):
        if not 0 <= version <= U32_MAX:
            raise InvariantViolationError(f"{name} {version} does not fit in 32 bits")
    total = HEADER_SIZE + len(app) + len(boot)
    if total > U32_MAX:
        raise TooLargeError(f"container would be {total} bytes, limit is {U32_MAX}")

    app_entry = ImageEntry(
        identifier=ImageId.APP,
        reserved=0,
        offset=HEADER_SIZE,
        length=len(app),
        checksum=crc32(app),
        version=app_version,
    )
    boot_entry = ImageEntry(
        identifier=ImageId.BOOT,
        reserved=0,
        offset=HEADER_SIZE + len(app),
        length=len(boot),
        checksum=crc32(boot),
        version=boot_version,
    )
    header = UpdateHeader(TABLE_VERSION, TABLE_LEN, (app_entry, boot_entry), 0)
    header = dataclasses.replace(header, table_checksum=table_checksum_of(header))
    logger.debug(
        f"Built update: app {len(app)} bytes v{app_version}, boot {len(boot)} bytes v{boot_version}"
    )
    return FirmwareUpdate(header=header, app_payload=bytes(app), boot_payload=bytes(boot))


def unpack_images(update: FirmwareUpdate) -> tuple[bytes, bytes]:
    """Return the (app, bootloader) payloads."""
    return update.app_payload, update.boot_payload


def describe(update: FirmwareUpdate) -> list[tuple[str, int, int]]:
    """Header table rows in file order as ``(field, value, width_in_bytes)``."""
    header = update.header
    rows: list[tuple[str, int, int]] = [
        ("table_ver", header.table_ver, 2),
        ("table_len", header.table_len, 2),
    ]
    for slot, entry in enumerate(header.images):
        prefix = f"images[{slot}]"
        rows += [
            (f"{prefix}.identifier", entry.identifier, 2),
            (f"{prefix}.reserved", entry.reserved, 2),
            (f"{prefix}.offset", entry.offset, 4),
            (f"{prefix}.length", entry.length, 4),
            (f"{prefix}.checksum", entry.checksum, 4),
            (f"{prefix}.version", entry.version, 4),
        ]
    rows.append(("table_checksum", header.table_checksum, 4))
    return rows


def to_dict(update: FirmwareUpdate) -> dict[str, Any]:
    """JSON-friendly view of the header table."""
    header = update.header
    return {
        "table_ver": header.table_ver,
        "table_len": header.table_len,
        "images": [
            {
                "identifier": entry.identifier,
                "name": ImageId(entry.identifier).label,
                "reserved": entry.reserved,
                "offset": entry.offset,
                "length": entry.length,
                "checksum": f"0x{entry.checksum:08x}",
                "version": entry.version,
            }
            for entry in header.images
        ],
        "table_checksum": f"0x{header.table_checksum:08x}",
        "size": update.size,
    }
