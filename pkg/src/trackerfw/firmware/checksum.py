"""CRC-32 engine shared by the image checksums and the table checksum.

Parameters are the IEEE 802.3 ones (the variant zlib, Ethernet and most
embedded SDKs call "CRC-32"):

    width 32, reflected polynomial 0xEDB88320 (normal form 0x04C11DB7),
    initial register 0xFFFFFFFF, reflected input/output, final XOR 0xFFFFFFFF,
    check value crc32(b"123456789") == 0xCBF43926.

Whether a particular device family uses exactly this variant cannot be told
from the container alone; if checksums computed here never match a real
update, the parameters above are the first thing to compare.
"""

from collections.abc import Iterable
from typing import NewType

Crc32Value = NewType("Crc32Value", int)
Crc32State = NewType("Crc32State", int)

CRC32_POLY = 0xEDB88320
CRC32_INIT = 0xFFFFFFFF
CRC32_XOROUT = 0xFFFFFFFF

CRC32_START = Crc32State(CRC32_INIT)


def _build_table(poly: int) -> tuple[int, ...]:
    table = []
    for i in range(256):
        c = i
        for _ in range(8):
            c = (c >> 1) ^ poly if c & 1 else c >> 1
        table.append(c)
    return tuple(table)


_TABLE = _build_table(CRC32_POLY)


def crc32_incremental(state: Crc32State, chunk: bytes) -> Crc32State:
    """Fold one chunk into a running CRC register.

    Args:
        state: Register value, ``CRC32_START`` for a fresh message.
        chunk: Next slice of the message.

    Returns:
        Updated register; pass it to ``finalize`` once all chunks are in.
    """
    crc = state
    table = _TABLE
    for byte in chunk:
        crc = (crc >> 8) ^ table[(crc ^ byte) & 0xFF]
    return Crc32State(crc)


def finalize(state: Crc32State) -> Crc32Value:
    """Apply the final XOR to a running register."""
    return Crc32Value(state ^ CRC32_XOROUT)


def crc32(data: bytes) -> Crc32Value:
    """One-shot CRC-32 of ``data``."""
    return finalize(crc32_incremental(CRC32_START, data))


def crc32_chunks(chunks: Iterable[bytes]) -> Crc32Value:
    """CRC-32 of the concatenation of ``chunks`` without joining them."""
    state = CRC32_START
    for chunk in chunks:
        state = crc32_incremental(state, chunk)
    return finalize(state)


def format_crc(value: int) -> str:
    """Render a checksum the way every command prints it: ``0x`` + 8 lowercase hex digits."""
    return f"0x{value:08x}"
