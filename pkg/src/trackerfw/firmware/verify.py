"""Tracker-side acceptance logic.

Checks run in a fixed order and the first failure is reported:

1. structure (parse)
2. table checksum over ``[0, table_len)``
3. app image checksum
4. bootloader image checksum
5. MAC trailer over the whole container (``CHECKSUM_AND_MAC`` only)

The verifier takes raw bytes rather than a parsed value: a device only ever
sees bytes, and a malformed file must come back as a Reject, not an exception.
Version monotonicity (anti-rollback) is not checked.
"""

import dataclasses
import logging
from enum import Enum
from typing import Any

from trackerfw.errors import (
    BadTableLengthError,
    BadTableVersionError,
    ContainerError,
)
from trackerfw.firmware.checksum import crc32
from trackerfw.firmware.container import ImageId, parse_update, table_checksum_of
from trackerfw.firmware.mac import KEY_SIZE, MacStatus, split_trailer, verify_mac

logger = logging.getLogger(__name__)


class VerifyMode(str, Enum):
    """Which checks a device performs."""

    CHECKSUM_ONLY = "checksum-only"
    CHECKSUM_AND_MAC = "checksum-and-mac"


class Verdict(str, Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"


class RejectCause(str, Enum):
    """Why a file was refused. ``NONE`` accompanies an Accept."""

    NONE = "None"
    BAD_TABLE_VERSION = "BadTableVersion"
    BAD_TABLE_LENGTH = "BadTableLength"
    TABLE_CHECKSUM_MISMATCH = "TableChecksumMismatch"
    IMAGE_CHECKSUM_MISMATCH = "ImageChecksumMismatch"
    BOUNDS_ERROR = "BoundsError"
    MAC_MISSING = "MacMissing"
    MAC_MISMATCH = "MacMismatch"


@dataclasses.dataclass(frozen=True)
class VerifyPolicy:
    """Device verification policy; a key is held exactly when the mode needs one."""

    mode: VerifyMode = VerifyMode.CHECKSUM_ONLY
    mac_key: bytes | None = dataclasses.field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.mode is VerifyMode.CHECKSUM_AND_MAC:
            if self.mac_key is None or len(self.mac_key) != KEY_SIZE:
                raise ValueError(f"{self.mode.value} policy needs a {KEY_SIZE}-byte MAC key")
        elif self.mac_key is not None:
            raise ValueError(f"{self.mode.value} policy must not carry a MAC key")

    @classmethod
    def checksum_only(cls) -> "VerifyPolicy":
        return cls(VerifyMode.CHECKSUM_ONLY)

    @classmethod
    def with_mac(cls, key: bytes) -> "VerifyPolicy":
        return cls(VerifyMode.CHECKSUM_AND_MAC, key)


@dataclasses.dataclass(frozen=True)
class VerificationReport:
    """Accept/reject outcome. Accept iff cause is NONE iff versions are present."""

    verdict: Verdict
    cause: RejectCause = RejectCause.NONE
    image: ImageId | None = None  # set only for IMAGE_CHECKSUM_MISMATCH
    installed_versions: tuple[int, int] | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT

    @classmethod
    def accept(cls, app_version: int, boot_version: int) -> "VerificationReport":
        return cls(Verdict.ACCEPT, installed_versions=(app_version, boot_version))

    @classmethod
    def reject(cls, cause: RejectCause, image: ImageId | None = None) -> "VerificationReport":
        return cls(Verdict.REJECT, cause=cause, image=image)

    @property
    def cause_text(self) -> str:
        if self.cause is RejectCause.IMAGE_CHECKSUM_MISMATCH and self.image is not None:
            return f"{self.cause.value}({self.image.label})"
        return self.cause.value

    def summary(self) -> str:
        """One-line CLI form: ``ACCEPT app=<v> boot=<v>`` or ``REJECT <cause>``."""
        if self.installed_versions is not None:
            app, boot = self.installed_versions
            return f"ACCEPT app={app} boot={boot}"
        return f"REJECT {self.cause_text}"

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {"verdict": self.verdict.value, "cause": self.cause.value}
        if self.image is not None:
            result["image"] = self.image.label
        if self.installed_versions is not None:
            result["app_version"], result["boot_version"] = self.installed_versions
        return result


def _structural_cause(error: ContainerError) -> RejectCause:
    if isinstance(error, BadTableVersionError):
        return RejectCause.BAD_TABLE_VERSION
    if isinstance(error, BadTableLengthError):
        return RejectCause.BAD_TABLE_LENGTH
    # Short input, overlapping payloads and bad identifiers all mean the
    # device cannot locate the images.
    return RejectCause.BOUNDS_ERROR


def verify(data: bytes, policy: VerifyPolicy) -> VerificationReport:
    """Run the device checks over ``data`` and report the first failure, if any."""
    container = bytes(data)
    trailer = None
    if policy.mode is VerifyMode.CHECKSUM_AND_MAC:
        container, trailer = split_trailer(container)

    try:
        update = parse_update(container)
    except ContainerError as e:
        # An untagged container whose last payload happens to end in
        # "MAC1" + 32 bytes is still intact; the MAC check rejects it.
        if trailer is None:
            logger.debug(f"Structural check failed: {e}")
            return VerificationReport.reject(_structural_cause(e))
        try:
            update = parse_update(bytes(data))
        except ContainerError:
            logger.debug(f"Structural check failed: {e}")
            return VerificationReport.reject(_structural_cause(e))

    if table_checksum_of(update.header) != update.header.table_checksum:
        return VerificationReport.reject(RejectCause.TABLE_CHECKSUM_MISMATCH)

    for which in ImageId:
        if crc32(update.payload(which)) != update.entry(which).checksum:
            return VerificationReport.reject(RejectCause.IMAGE_CHECKSUM_MISMATCH, which)

    if policy.mode is VerifyMode.CHECKSUM_AND_MAC:
        assert policy.mac_key is not None
        status = verify_mac(data, policy.mac_key)
        if status is MacStatus.MISSING:
            return VerificationReport.reject(RejectCause.MAC_MISSING)
        if status is MacStatus.MISMATCH:
            return VerificationReport.reject(RejectCause.MAC_MISMATCH)

    return VerificationReport.accept(
        update.entry(ImageId.APP).version, update.entry(ImageId.BOOT).version
    )
