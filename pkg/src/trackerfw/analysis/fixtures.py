"""Synthetic firmware blobs with known ground truth.

A fixture is random non-printable filler, a packed pool of NUL-terminated
printable strings (the "debug strings"), and word-aligned little-endian
absolute pointers to string starts computed for a chosen load address.
Filler never contains printable bytes and pointers are never adjacent, so
the planted strings are exactly what ``detect_strings`` should report.
"""

import dataclasses
import logging
import random
import struct
from typing import Any

from trackerfw.errors import DoesNotFitError
from trackerfw.firmware.container import FirmwareUpdate, ImageId, build_update

logger = logging.getLogger(__name__)

STRING_MIN_LEN = 8
STRING_MAX_LEN = 24
_PRINTABLE = bytes(range(0x20, 0x7F))
_FILLER = bytes(b for b in range(256) if not 0x20 <= b <= 0x7E)
_SLOT = 8  # one pointer word followed by one filler word
_WORD = struct.Struct("<I")


@dataclasses.dataclass(frozen=True)
class FixtureTruth:
    """What the generator planted."""

    seed: int
    base: int
    string_offsets: tuple[int, ...]
    string_lengths: tuple[int, ...]
    reference_offsets: tuple[int, ...]
    stripped: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "base": f"0x{self.base:08x}",
            "string_offsets": list(self.string_offsets),
            "string_lengths": list(self.string_lengths),
            "reference_offsets": list(self.reference_offsets),
            "stripped": self.stripped,
        }


def gen_fixture(
    seed: int,
    n_strings: int,
    n_refs: int,
    base: int,
    payload_size: int,
    strip: bool = False,
) -> tuple[bytes, FixtureTruth]:
    """Generate a deterministic blob with planted strings and references.

    Args:
        seed: RNG seed; equal seeds give identical blobs.
        n_strings: Number of planted strings.
        n_refs: Number of absolute pointers to (randomly chosen) string starts.
        base: Load address the pointers assume.
        payload_size: Blob length in bytes.
        strip: Zero the strings afterwards, keeping the pointers.

    Raises:
        DoesNotFitError: Strings and pointers do not fit, or pointers would overflow 32 bits.
    """
    if n_strings < 0 or n_refs < 0 or payload_size < 0:
        raise DoesNotFitError("counts and sizes must be non-negative")
    if n_refs > 0 and n_strings == 0:
        raise DoesNotFitError("references need at least one string to point at")

    rng = random.Random(seed)
    blob = bytearray(rng.choices(_FILLER, k=payload_size))
    strings = [
        bytes(rng.choices(_PRINTABLE, k=rng.randint(STRING_MIN_LEN, STRING_MAX_LEN)))
        for _ in range(n_strings)
    ]
    pool = b"".join(s + b"\x00" for s in strings)

    latest_pool_start = payload_size - len(pool)
    if latest_pool_start < _SLOT * n_refs:
        raise DoesNotFitError(
            f"{n_strings} strings ({len(pool)} bytes) and {n_refs} references "
            f"({_SLOT * n_refs} bytes) do not fit in {payload_size} bytes"
        )
    pool_start = rng.randint(_SLOT * n_refs, latest_pool_start)
    blob[pool_start : pool_start + len(pool)] = pool

    offsets = []
    cursor = pool_start
    for s in strings:
        offsets.append(cursor)
        cursor += len(s) + 1

    if offsets and base + max(offsets) >= 1 << 32:
        raise DoesNotFitError(f"base 0x{base:x} pushes string addresses past 2**32")
    if base < 0:
        raise DoesNotFitError(f"base must be non-negative, got {base}")

    slots = sorted(rng.sample(range(0, pool_start - _SLOT + 1, _SLOT), n_refs))
    for slot in slots:
        _WORD.pack_into(blob, slot, base + rng.choice(offsets))

    if strip:
        for offset, s in zip(offsets, strings):
            blob[offset : offset + len(s)] = bytes(len(s))

    truth = FixtureTruth(
        seed=seed,
        base=base,
        string_offsets=tuple(offsets),
        string_lengths=tuple(len(s) for s in strings),
        reference_offsets=tuple(slots),
        stripped=strip,
    )
    logger.debug(
        f"Fixture seed={seed}: {n_strings} strings, {n_refs} refs, base 0x{base:08x}, "
        f"{payload_size} bytes"
    )
    return bytes(blob), truth


def build_fixture_update(
    seed: int,
    app_base: int = 0x00018000,
    boot_base: int = 0x0003AC00,
    app_size: int = 8192,
    boot_size: int = 2048,
    app_version: int = 2,
    boot_version: int = 1,
    strip: bool = False,
) -> tuple[FirmwareUpdate, dict[ImageId, FixtureTruth]]:
    """Build a consistent AFW1 update whose two images are fixtures at different bases.

    The app image is the larger one and the bootloader sits at ``boot_base``,
    by default not page-aligned.
    """
    rng = random.Random(seed)
    app_seed, boot_seed = rng.getrandbits(64), rng.getrandbits(64)
    app, app_truth = gen_fixture(
        app_seed, n_strings=40, n_refs=60, base=app_base, payload_size=app_size, strip=strip
    )
    boot, boot_truth = gen_fixture(
        boot_seed, n_strings=30, n_refs=25, base=boot_base, payload_size=boot_size, strip=strip
    )
    update = build_update(app, boot, app_version, boot_version)
    return update, {ImageId.APP: app_truth, ImageId.BOOT: boot_truth}
