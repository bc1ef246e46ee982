"""Tracker node: receives firmware in chunks and runs the device verifier on COMMIT."""

import dataclasses
import io
import logging
import socket
import socketserver
import threading
from enum import Enum
from types import TracebackType
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from trackerfw.channel.node import ServiceNode
from trackerfw.channel.protocol import (
    MAX_CHUNK,
    Begin,
    Chunk,
    Commit,
    CommitReply,
    ErrorCode,
    ErrorReply,
    Reply,
    Request,
    VersionQuery,
    VersionReply,
    decode_reply,
    decode_request,
    encode,
    frame,
    read_frame,
)
from trackerfw.errors import ProtocolViolationError
from trackerfw.firmware.verify import VerificationReport, VerifyPolicy, verify

logger = logging.getLogger(__name__)


class TrackerPhase(str, Enum):
    IDLE = "Idle"
    RECEIVING = "Receiving"
    VALIDATING = "Validating"
    INSTALLED = "Installed"
    REJECTED = "Rejected"


@dataclasses.dataclass(frozen=True)
class TrackerState:
    """Snapshot of a tracker. Versions change only on a transition to Installed."""

    phase: TrackerPhase
    installed_app_version: int
    installed_boot_version: int
    policy: VerifyPolicy
    bytes_so_far: int = 0
    total_size: int = 0
    last_report: VerificationReport | None = None
    installed_firmware: bytes | None = None


class SessionError(ProtocolViolationError):
    """Protocol violation inside a session; the state is left as it was."""

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = code


class TrackerDevice:
    """Session state machine of one tracker, independent of the transport."""

    def __init__(self, app_version: int, boot_version: int, policy: VerifyPolicy):
        """Initialize a tracker with the given installed versions.

        Args:
            app_version: Installed app version.
            boot_version: Installed bootloader version.
            policy: Checks run on COMMIT.
        """
        self._lock = threading.Lock()
        self._buffer = bytearray()
        self._state = TrackerState(
            phase=TrackerPhase.IDLE,
            installed_app_version=app_version,
            installed_boot_version=boot_version,
            policy=policy,
        )

    @property
    def state(self) -> TrackerState:
        with self._lock:
            return self._state

    def versions(self) -> tuple[int, int]:
        state = self.state
        return state.installed_app_version, state.installed_boot_version

    def begin(self, total_size: int) -> None:
        """Start a transfer; an in-flight one is discarded."""
        with self._lock:
            if self._state.phase is TrackerPhase.RECEIVING:
                logger.info(
                    f"BEGIN aborts transfer at {self._state.bytes_so_far}/{self._state.total_size}"
                )
            self._buffer = bytearray()
            self._state = dataclasses.replace(
                self._state, phase=TrackerPhase.RECEIVING, bytes_so_far=0, total_size=total_size
            )
        logger.debug(f"Receiving {total_size} bytes")

    def chunk(self, payload: bytes) -> None:
        with self._lock:
            state = self._state
            if state.phase is not TrackerPhase.RECEIVING:
                raise SessionError(ErrorCode.CHUNK_WITHOUT_BEGIN, "CHUNK without BEGIN")
            if len(payload) > MAX_CHUNK:
                raise SessionError(
                    ErrorCode.CHUNK_TOO_LARGE, f"CHUNK of {len(payload)} bytes exceeds {MAX_CHUNK}"
                )
            if state.bytes_so_far + len(payload) > state.total_size:
                raise SessionError(
                    ErrorCode.OVERFLOW,
                    f"CHUNK overflows announced size {state.total_size}",
                )
            self._buffer += payload
            self._state = dataclasses.replace(state, bytes_so_far=len(self._buffer))

    def commit(self) -> VerificationReport:
        """Verify the received image and install or reject it."""
        with self._lock:
            state = self._state
            if state.phase is not TrackerPhase.RECEIVING:
                raise SessionError(ErrorCode.COMMIT_WITHOUT_BEGIN, "COMMIT without BEGIN")
            if state.bytes_so_far != state.total_size:
                raise SessionError(
                    ErrorCode.INCOMPLETE,
                    f"COMMIT after {state.bytes_so_far} of {state.total_size} bytes",
                )
            firmware = bytes(self._buffer)
            self._buffer = bytearray()
            self._state = dataclasses.replace(state, phase=TrackerPhase.VALIDATING)

            report = verify(firmware, state.policy)
            if report.installed_versions is not None:
                app, boot = report.installed_versions
                self._state = dataclasses.replace(
                    state,
                    phase=TrackerPhase.INSTALLED,
                    installed_app_version=app,
                    installed_boot_version=boot,
                    last_report=report,
                    installed_firmware=firmware,
                )
                logger.info(f"Installed firmware: app={app} boot={boot}")
            else:
                self._state = dataclasses.replace(
                    state, phase=TrackerPhase.REJECTED, last_report=report
                )
                logger.warning(f"Rejected firmware: {report.cause_text}")
            return report

    def handle(self, request: Request) -> Reply | None:
        """Apply one request; returns the reply to send, if the request has one."""
        try:
            match request:
                case Begin(total_size):
                    self.begin(total_size)
                    return None
                case Chunk(payload):
                    self.chunk(payload)
                    return None
                case Commit():
                    return CommitReply.from_report(self.commit())
                case VersionQuery():
                    app, boot = self.versions()
                    return VersionReply(app, boot)
        except SessionError as e:
            logger.warning(f"Session error: {e}")
            return ErrorReply(e.code)
        raise TypeError(f"Unhandled request {request!r}")


class _TrackerHandler(socketserver.StreamRequestHandler):
    server: "_TrackerServer"
    timeout = 10.0  # idle sessions must not pin the single-connection server

    def handle(self) -> None:
        device = self.server.device
        while True:
            try:
                body = read_frame(self.rfile)
                if body is None:
                    return
                request = decode_request(body)
            except (TimeoutError, ConnectionError) as e:
                logger.warning(f"Session dropped: {e}")
                return
            except ProtocolViolationError as e:
                logger.warning(f"Malformed frame, closing session: {e}")
                self.wfile.write(frame(encode(ErrorReply(ErrorCode.MALFORMED))))
                return
            reply = device.handle(request)
            if reply is not None:
                self.wfile.write(frame(encode(reply)))


class _TrackerServer(socketserver.TCPServer):
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], device: TrackerDevice):
        self.device = device
        super().__init__(address, _TrackerHandler)


class TrackerNode(ServiceNode):
    """A TrackerDevice reachable over the framed TCP protocol."""

    name = "tracker"

    def __init__(self, device: TrackerDevice, host: str = "127.0.0.1", port: int = 0):
        super().__init__(host, port)
        self.device = device

    def _make_server(self) -> socketserver.TCPServer:
        return _TrackerServer((self.host, self.port), self.device)


def tracker_run(
    app_version: int,
    boot_version: int,
    policy: VerifyPolicy,
    host: str = "127.0.0.1",
    port: int = 0,
) -> TrackerNode:
    """Start a tracker node with the given installed versions and policy."""
    return TrackerNode(TrackerDevice(app_version, boot_version, policy), host, port).start()


class TrackerClient:
    """PCD-side connection to a tracker node."""

    def __init__(self, address: tuple[str, int], timeout: float = 5.0):
        self.address = address
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._rfile: io.BufferedReader | None = None

    def connect(self) -> Self:
        if self._sock is None:
            self._sock = socket.create_connection(self.address, timeout=self.timeout)
            self._rfile = self._sock.makefile("rb")
        return self

    def close(self) -> None:
        if self._rfile is not None:
            self._rfile.close()
            self._rfile = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def send(self, request: Request) -> None:
        if self._sock is None:
            self.connect()
        assert self._sock is not None
        self._sock.sendall(frame(encode(request)))

    def receive(self) -> Reply:
        assert self._rfile is not None, "not connected"
        body = read_frame(self._rfile)
        if body is None:
            raise ProtocolViolationError("tracker closed the connection")
        return decode_reply(body)

    def query_versions(self) -> VersionReply:
        self.send(VersionQuery())
        reply = self.receive()
        if not isinstance(reply, VersionReply):
            raise ProtocolViolationError(f"expected VERSION reply, got {reply!r}")
        return reply

    def upload(self, firmware: bytes, chunk_size: int = MAX_CHUNK) -> tuple[Reply, int]:
        """Stream ``firmware`` as BEGIN, CHUNK..., COMMIT.

        Returns:
            The tracker's first reply after COMMIT and the number of chunks sent.
        """
        self.send(Begin(len(firmware)))
        chunks = 0
        for start in range(0, len(firmware), chunk_size):
            self.send(Chunk(firmware[start : start + chunk_size]))
            chunks += 1
        self.send(Commit())
        return self.receive(), chunks

    def __enter__(self) -> Self:
        return self.connect()

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        self.close()
