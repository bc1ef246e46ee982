"""Printable-string detection and load-address estimation.

A raw image carries absolute pointers to its own debug strings in
word-aligned literal pools. For the right load address ``b``, many words
``w`` satisfy ``w - b == offset of a string``. ``estimate_base`` scores a
stride of candidate bases that way; ``vote_base`` lets every
(word, string) pair vote for ``w - s`` and so also recovers bases that are
not stride-aligned, such as the second image of a two-image update.
"""

import bisect
import dataclasses
import logging
import re
import struct
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Any

from trackerfw.errors import AnalysisError, EmptyRangeError
from trackerfw.firmware.container import FirmwareUpdate, ImageId

logger = logging.getLogger(__name__)

ADDRESS_LIMIT = 1 << 32
DEFAULT_MIN_LEN = 5
DEFAULT_SCAN_START = 0x00000000
DEFAULT_SCAN_END = 0x00080000
DEFAULT_STRIDE = 0x1000
DEFAULT_MIN_VOTES = 10

_WORD = struct.Struct("<I")


@dataclasses.dataclass(frozen=True)
class DetectedString:
    """NUL-terminated printable run; ``length`` excludes the terminator."""

    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclasses.dataclass(frozen=True)
class BaseCandidate:
    """Candidate load address and the number of words that resolve to string starts."""

    base: int
    score: int
    rank: int

    def format(self) -> str:
        return f"0x{self.base:08x}  score={self.score}"

    def to_dict(self) -> dict[str, int | str]:
        return {"rank": self.rank, "base": f"0x{self.base:08x}", "score": self.score}


def _string_pattern(min_len: int) -> re.Pattern[bytes]:
    if min_len < 1:
        raise AnalysisError(f"min_len must be at least 1, got {min_len}")
    # Greedy from the leftmost printable byte, so every match is a maximal run.
    return re.compile(rb"[\x20-\x7e]{%d,}\x00" % min_len)


def detect_strings(blob: bytes, min_len: int = DEFAULT_MIN_LEN) -> list[DetectedString]:
    """Find every maximal NUL-terminated printable-ASCII run of at least ``min_len`` bytes."""
    return [
        DetectedString(offset=match.start(), length=match.end() - match.start() - 1)
        for match in _string_pattern(min_len).finditer(blob)
    ]


def strip_strings(blob: bytes, min_len: int = DEFAULT_MIN_LEN) -> bytes:
    """Zero out every detected string, as a release build without debug strings would."""
    stripped = bytearray(blob)
    for found in detect_strings(blob, min_len):
        stripped[found.offset : found.end] = bytes(found.length)
    return bytes(stripped)


def _word_counts(blob: bytes) -> Counter[int]:
    aligned = len(blob) - len(blob) % _WORD.size
    return Counter(word for (word,) in _WORD.iter_unpack(blob[:aligned]))


def _score(word_counts: Counter[int], starts: list[int], base: int) -> int:
    return sum(word_counts.get(base + start, 0) for start in starts)


def score_base(blob: bytes, base: int, min_len: int = DEFAULT_MIN_LEN) -> int:
    """Number of aligned words in ``blob`` that point at a string start when loaded at ``base``."""
    starts = [found.offset for found in detect_strings(blob, min_len)]
    return _score(_word_counts(blob), starts, base)


def estimate_base(
    blob: bytes,
    start: int = DEFAULT_SCAN_START,
    end: int = DEFAULT_SCAN_END,
    stride: int = DEFAULT_STRIDE,
    min_len: int = DEFAULT_MIN_LEN,
    workers: int = 1,
) -> list[BaseCandidate]:
    """Score every candidate base in ``range(start, end, stride)``.

    Args:
        blob: Raw image.
        start: First candidate base.
        end: Exclusive upper bound, at most 2**32.
        stride: Distance between candidates.
        min_len: Minimum string length for ``detect_strings``.
        workers: Threads used for scoring; the result does not depend on it.

    Returns:
        All candidates, sorted by score descending then base ascending, ranked from 1.

    Raises:
        EmptyRangeError: No candidate lies in the range.
        AnalysisError: Stride or bounds are invalid.
    """
    if stride <= 0:
        raise AnalysisError(f"stride must be positive, got {stride}")
    if start < 0 or end > ADDRESS_LIMIT:
        raise AnalysisError(f"candidate range [0x{start:x}, 0x{end:x}) leaves the 32-bit space")
    bases = range(start, end, stride)
    if not bases:
        raise EmptyRangeError(f"candidate range [0x{start:x}, 0x{end:x}) is empty")

    starts = [found.offset for found in detect_strings(blob, min_len)]
    word_counts = _word_counts(blob)
    logger.debug(f"Scoring {len(bases)} bases against {len(starts)} strings")

    if workers > 1 and len(bases) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            scores = list(executor.map(lambda b: _score(word_counts, starts, b), bases))
    else:
        scores = [_score(word_counts, starts, b) for b in bases]

    ordered = sorted(zip(bases, scores), key=lambda item: (-item[1], item[0]))
    return [
        BaseCandidate(base=base, score=score, rank=rank)
        for rank, (base, score) in enumerate(ordered, start=1)
    ]


def vote_base(
    blob: bytes, min_len: int = DEFAULT_MIN_LEN, min_votes: int = DEFAULT_MIN_VOTES
) -> tuple[int, int] | None:
    """Recover a load address by histogram voting, with no candidate range.

    Every aligned word ``w`` and string start ``s`` vote for ``w - s`` when the
    image loaded there still fits below 2**32. The modal base wins (lowest
    base among ties) if it has at least ``min_votes`` votes.

    Cost grows with distinct words times strings: a 64 KiB image with a few
    hundred strings takes on the order of a second.

    Returns:
        ``(base, votes)`` or None.
    """
    starts = [found.offset for found in detect_strings(blob, min_len)]
    if not starts:
        return None
    limit = ADDRESS_LIMIT - len(blob)
    votes: Counter[int] = Counter()
    for word, count in _word_counts(blob).items():
        # only strings with 0 <= word - s <= limit vote
        lo = bisect.bisect_left(starts, word - limit)
        hi = bisect.bisect_right(starts, word)
        if lo >= hi:
            continue
        bases = map(word.__sub__, starts[lo:hi])
        if count == 1:
            votes.update(bases)
        else:
            for base in bases:
                votes[base] += count
    if not votes:
        return None
    top = max(votes.values())
    base = min(base for base, n in votes.items() if n == top)
    if top < min_votes:
        logger.debug(f"Best base 0x{base:08x} has {top} votes, below {min_votes}")
        return None
    return base, top


class AnalysisMethod(str, Enum):
    SCAN = "scan"
    VOTE = "vote"


@dataclasses.dataclass(frozen=True)
class ImageAnalysis:
    """Load-address result for one image of an update."""

    image: ImageId
    size: int
    strings: int
    method: AnalysisMethod
    base: int | None
    score: int

    def format(self) -> str:
        base = f"0x{self.base:08x}" if self.base is not None else "unresolved"
        return (
            f"{self.image.label:<4}  size={self.size}  strings={self.strings}  "
            f"method={self.method.value}  base={base}  score={self.score}"
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "image": self.image.label,
            "size": self.size,
            "strings": self.strings,
            "method": self.method.value,
            "base": f"0x{self.base:08x}" if self.base is not None else None,
            "score": self.score,
        }


def analyze_update(
    update: FirmwareUpdate,
    start: int = DEFAULT_SCAN_START,
    end: int = DEFAULT_SCAN_END,
    stride: int = DEFAULT_STRIDE,
    min_len: int = DEFAULT_MIN_LEN,
    min_votes: int = DEFAULT_MIN_VOTES,
) -> list[ImageAnalysis]:
    """Resolve the load address of both images of an update.

    The stride scan only reliably finds the larger image's base; the smaller
    image, loaded elsewhere and usually not on a stride boundary, is resolved
    by voting. Results come back larger image first.
    """
    by_size = sorted(ImageId, key=lambda which: (-len(update.payload(which)), which))
    results = []
    for position, which in enumerate(by_size):
        blob = update.payload(which)
        strings = len(detect_strings(blob, min_len))
        if position == 0:
            ranked = estimate_base(blob, start, end, stride, min_len)
            best = ranked[0]
            base = best.base if best.score > 0 else None
            results.append(
                ImageAnalysis(which, len(blob), strings, AnalysisMethod.SCAN, base, best.score)
            )
        else:
            voted = vote_base(blob, min_len, min_votes)
            base, score = voted if voted is not None else (None, 0)
            results.append(
                ImageAnalysis(which, len(blob), strings, AnalysisMethod.VOTE, base, score)
            )
        logger.info(f"Resolved {results[-1].format()}")
    return results
