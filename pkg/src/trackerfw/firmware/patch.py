"""Adversary-side modifications and the "resign" step.

``set_version`` and ``patch_bytes`` leave every checksum stale on purpose;
``resign`` recomputes both checksum classes so the result passes any
checksum-only device. CRC-32 catches transmission errors, not forgers.
"""

import dataclasses
import logging

from trackerfw.errors import OutOfRangeError
from trackerfw.firmware.checksum import crc32
from trackerfw.firmware.container import (
    U32_MAX,
    FirmwareUpdate,
    ImageId,
    table_checksum_of,
)

logger = logging.getLogger(__name__)


def set_version(update: FirmwareUpdate, which: ImageId, version: int) -> FirmwareUpdate:
    """Replace the version field of one image entry; checksums are not touched."""
    if not 0 <= version <= U32_MAX:
        raise OutOfRangeError(f"version {version} does not fit in 32 bits")
    entry = dataclasses.replace(update.entry(which), version=version)
    logger.debug(f"Set {which.label} version to 0x{version:08x}")
    return dataclasses.replace(update, header=update.header.with_entry(which, entry))


def patch_bytes(update: FirmwareUpdate, which: ImageId, at: int, data: bytes) -> FirmwareUpdate:
    """Overwrite ``data`` into one payload at offset ``at``, in place (no resizing).

    Raises:
        OutOfRangeError: The window ``[at, at + len(data))`` leaves the payload.
    """
    payload = update.payload(which)
    if at < 0 or at + len(data) > len(payload):
        raise OutOfRangeError(
            f"patch [{at}, {at + len(data)}) exceeds {which.label} payload of {len(payload)} bytes"
        )
    patched = payload[:at] + bytes(data) + payload[at + len(data) :]
    logger.debug(f"Patched {len(data)} byte(s) of {which.label} at offset {at}")
    return update.with_payload(which, patched)


def resign(update: FirmwareUpdate) -> FirmwareUpdate:
    """Recompute both image checksums, then the table checksum over the rebuilt header."""
    header = update.header
    for which in ImageId:
        entry = dataclasses.replace(header.entry(which), checksum=crc32(update.payload(which)))
        header = header.with_entry(which, entry)
    header = dataclasses.replace(header, table_checksum=table_checksum_of(header))
    if header != update.header:
        logger.info(f"Resigned update: table checksum now 0x{header.table_checksum:08x}")
    return dataclasses.replace(update, header=header)
