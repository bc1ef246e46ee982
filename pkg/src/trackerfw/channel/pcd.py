"""PCD (phone) side of the update flow.

The PCD fetches the manifest, downloads newer firmware and relays it to the
tracker. It verifies nothing itself; only the tracker's checks decide what
is installed. All HTTP goes through the endpoint the PCD is given; the
manifest URL only contributes its path, the way a DNS override routes every
vendor request through a proxy.
"""

import dataclasses
import logging
from enum import Enum
from typing import Any
from urllib.parse import urlsplit

import httpx

from trackerfw.channel.manifest import UpdateManifest
from trackerfw.channel.protocol import MAX_CHUNK, CommitReply, ErrorReply
from trackerfw.channel.server import FIRMWARE_PATH, MANIFEST_PATH
from trackerfw.channel.tracker import TrackerClient
from trackerfw.errors import ChannelError
from trackerfw.firmware.container import ImageId
from trackerfw.firmware.verify import RejectCause, Verdict

logger = logging.getLogger(__name__)


class SyncOutcome(str, Enum):
    UP_TO_DATE = "up-to-date"
    INSTALLED = "installed"
    REJECTED = "rejected"
    ERROR = "error"


@dataclasses.dataclass(frozen=True)
class SyncReport:
    """Result of one PCD sync."""

    outcome: SyncOutcome
    manifest: UpdateManifest | None = None
    bytes_sent: int = 0
    chunks_sent: int = 0
    app_version: int | None = None
    boot_version: int | None = None
    cause: RejectCause | None = None
    image: ImageId | None = None
    error: str | None = None

    def summary(self) -> str:
        parts = [self.outcome.value]
        if self.app_version is not None:
            parts.append(f"app={self.app_version} (0x{self.app_version:08x})")
        if self.boot_version is not None:
            parts.append(f"boot={self.boot_version}")
        if self.cause is not None:
            cause = self.cause.value
            if self.image is not None:
                cause += f"({self.image.label})"
            parts.append(f"cause={cause}")
        parts.append(f"bytes_sent={self.bytes_sent}")
        if self.error:
            parts.append(f"error={self.error}")
        return "  ".join(parts)

    def to_dict(self) -> dict[str, Any]:
        return {
            "outcome": self.outcome.value,
            "manifest": self.manifest.to_document() if self.manifest else None,
            "bytes_sent": self.bytes_sent,
            "chunks_sent": self.chunks_sent,
            "app_version": self.app_version,
            "boot_version": self.boot_version,
            "cause": self.cause.value if self.cause else None,
            "error": self.error,
        }


def pcd_sync(
    server_url: str,
    tracker_address: tuple[str, int],
    chunk_size: int = MAX_CHUNK,
    timeout: float = 5.0,
) -> SyncReport:
    """Check for new firmware and, if newer than the tracker's app version, install it.

    Args:
        server_url: Base URL of the vendor server (or whatever sits in its place).
        tracker_address: (host, port) of the tracker node.
        chunk_size: CHUNK payload size, at most 20.
        timeout: Network timeout in seconds.

    Returns:
        SyncReport; network failures and rejections are outcomes, not exceptions.
    """
    manifest: UpdateManifest | None = None
    try:
        with httpx.Client(base_url=server_url.rstrip("/"), timeout=timeout) as http:
            response = http.get(MANIFEST_PATH)
            response.raise_for_status()
            manifest = UpdateManifest.from_json(response.content)
            logger.info(f"Manifest: {manifest.to_document()}")

            with TrackerClient(tracker_address, timeout) as tracker:
                current = tracker.query_versions()
                if not manifest.available or manifest.firmware_version <= current.app_version:
                    return SyncReport(
                        SyncOutcome.UP_TO_DATE,
                        manifest,
                        app_version=current.app_version,
                        boot_version=current.boot_version,
                    )

                path = urlsplit(manifest.url).path or FIRMWARE_PATH
                download = http.get(path)
                download.raise_for_status()
                firmware = download.content
                logger.info(f"Downloaded {len(firmware)} bytes from {path}, relaying to tracker")

                reply, chunks = tracker.upload(firmware, chunk_size)
                after = tracker.query_versions()
    except (httpx.HTTPError, OSError, ChannelError, ValueError) as e:
        logger.warning(f"Sync failed: {e}")
        return SyncReport(SyncOutcome.ERROR, manifest, error=str(e) or type(e).__name__)

    report = SyncReport(
        SyncOutcome.INSTALLED,
        manifest,
        bytes_sent=len(firmware),
        chunks_sent=chunks,
        app_version=after.app_version,
        boot_version=after.boot_version,
    )
    if isinstance(reply, ErrorReply):
        return dataclasses.replace(
            report, outcome=SyncOutcome.ERROR, error=f"tracker error {reply.code.name}"
        )
    assert isinstance(reply, CommitReply)
    if reply.verdict is Verdict.ACCEPT:
        return report
    return dataclasses.replace(
        report, outcome=SyncOutcome.REJECTED, cause=reply.cause, image=reply.image
    )
