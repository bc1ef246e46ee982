"""Lifecycle shared by the simulator's network nodes.

Each node owns one listening socket and one thread running
``serve_forever``; requests are handled one connection at a time.
"""

import logging
import socketserver
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from types import TracebackType
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

logger = logging.getLogger(__name__)


class ServiceNode:
    """Base class for a loopback service running on its own thread."""

    name = "node"

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        """Initialize the node without binding.

        Args:
            host: Interface to bind.
            port: TCP port; 0 picks an ephemeral one.
        """
        self.host = host
        self.port = port
        self._server: socketserver.TCPServer | None = None
        self._thread: threading.Thread | None = None

    def _make_server(self) -> socketserver.TCPServer:
        raise NotImplementedError

    def _on_bound(self) -> None:
        """Hook run after binding, before serving."""

    def start(self) -> Self:
        """Bind and start serving in a background thread."""
        if self._server is not None:
            return self
        self._server = self._make_server()
        self.port = self._server.server_address[1]
        self._on_bound()
        self._thread = threading.Thread(
            target=self._server.serve_forever,
            kwargs={"poll_interval": 0.05},
            name=f"{self.name}-{self.port}",
            daemon=True,
        )
        self._thread.start()
        logger.info(f"Started {self.name} on {self.host}:{self.port}")
        return self

    def stop(self) -> None:
        """Stop serving and close the listening socket."""
        if self._server is None:
            return
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        logger.info(f"Stopped {self.name} on {self.host}:{self.port}")
        self._server = None
        self._thread = None

    @property
    def address(self) -> tuple[str, int]:
        return self.host, self.port

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def __enter__(self) -> Self:
        return self.start()

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        self.stop()


class QuietHTTPRequestHandler(BaseHTTPRequestHandler):
    """HTTP/1.1 handler that closes after every response and logs through ``logging``."""

    protocol_version = "HTTP/1.1"

    def send_body(self, status: int, content_type: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(body)
        self.close_connection = True

    def send_not_found(self) -> None:
        self.send_body(404, "text/plain", b"not found\n")

    def log_message(self, format: str, *args: object) -> None:
        logger.debug(f"{self.client_address[0]} {format % args}")


class LoopbackHTTPServer(HTTPServer):
    """Single-threaded HTTP server that skips the reverse DNS lookup on bind."""

    def server_bind(self) -> None:
        socketserver.TCPServer.server_bind(self)
        host, port = self.server_address[:2]
        self.server_name = str(host)
        self.server_port = int(port)
