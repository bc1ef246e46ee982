"""Vendor update server: ``GET /manifest`` and ``GET /firmware`` over plain HTTP."""

import logging
import socketserver
from urllib.parse import urlsplit

from trackerfw.channel.manifest import UpdateManifest
from trackerfw.channel.node import LoopbackHTTPServer, QuietHTTPRequestHandler, ServiceNode

logger = logging.getLogger(__name__)

MANIFEST_PATH = "/manifest"
FIRMWARE_PATH = "/firmware"


class _VendorHandler(QuietHTTPRequestHandler):
    server: "_VendorHTTPServer"

    def do_GET(self) -> None:
        node = self.server.node
        path = urlsplit(self.path).path
        if path == MANIFEST_PATH:
            logger.debug(f"Serving manifest: {node.manifest.to_document()}")
            self.send_body(200, "application/json", node.manifest.to_json())
        elif path == FIRMWARE_PATH and node.firmware is not None:
            logger.info(f"Serving {len(node.firmware)}-byte firmware")
            self.send_body(200, "application/octet-stream", node.firmware)
        else:
            self.send_not_found()


class _VendorHTTPServer(LoopbackHTTPServer):
    def __init__(self, address: tuple[str, int], node: "VendorServer"):
        self.node = node
        super().__init__(address, _VendorHandler)


class VendorServer(ServiceNode):
    """The vendor's firmware availability endpoint."""

    name = "vendor-server"

    def __init__(
        self,
        manifest: UpdateManifest,
        firmware: bytes | None,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        """Initialize the server.

        Args:
            manifest: Manifest to advertise. An empty URL on an available
                manifest is filled in with this server's firmware URL.
            firmware: File served at /firmware; present exactly when available.
            host: Interface to bind.
            port: TCP port; 0 picks an ephemeral one.
        """
        super().__init__(host, port)
        if manifest.available != (firmware is not None):
            raise ValueError("firmware must be given exactly when the manifest is available")
        if firmware is not None and manifest.size != len(firmware):
            raise ValueError(
                f"manifest size {manifest.size} differs from firmware size {len(firmware)}"
            )
        self.manifest = manifest
        self.firmware = firmware

    @classmethod
    def offering(
        cls, firmware_version: int, firmware: bytes, host: str = "127.0.0.1", port: int = 0
    ) -> "VendorServer":
        """Server advertising ``firmware`` as version ``firmware_version``."""
        manifest = UpdateManifest.for_firmware(firmware_version, "", firmware)
        return cls(manifest, firmware, host, port)

    @classmethod
    def without_update(cls, host: str = "127.0.0.1", port: int = 0) -> "VendorServer":
        return cls(UpdateManifest.unavailable(), None, host, port)

    def _make_server(self) -> socketserver.TCPServer:
        return _VendorHTTPServer((self.host, self.port), self)

    def _on_bound(self) -> None:
        if self.manifest.available and not self.manifest.url:
            self.manifest = self.manifest.model_copy(update={"url": self.url + FIRMWARE_PATH})


def server_serve(
    manifest: UpdateManifest, firmware: bytes | None, host: str = "127.0.0.1", port: int = 0
) -> VendorServer:
    """Start a vendor server; raises OSError if the port cannot be bound."""
    return VendorServer(manifest, firmware, host, port).start()
