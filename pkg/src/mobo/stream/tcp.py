"""TCP front end for :class:`Broker` and a client with the same method surface."""
from __future__ import annotations

import logging
import socket
import socketserver
import threading

from . import frames
from .broker import (
    Broker,
    BrokerError,
    ConsumerHandle,
    Envelope,
    InvalidTopicName,
    PayloadTooLarge,
    UnknownTopic,
)
from .frames import FrameError

log = logging.getLogger(__name__)

_ERROR_CODES = [
    (UnknownTopic, "unknown_topic"),
    (InvalidTopicName, "invalid_topic"),
    (PayloadTooLarge, "payload_too_large"),
    (FrameError, "bad_frame"),
    (BrokerError, "broker_error"),
    (ValueError, "bad_request"),
    (TypeError, "bad_request"),
]


class BrokerConnectionError(ConnectionError):
    """Transport failure talking to a remote broker.

    ``retryable`` is true when reconnecting later may succeed (refused, reset).
    """

    def __init__(self, msg, retryable: bool = True):
        super().__init__(msg)
        self.retryable = retryable


class RemoteError(BrokerError):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def parse_address(addr: str) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"address {addr!r} is not HOST:PORT")
    return host or "127.0.0.1", int(port)


def _int_field(req, name, default=None):
    v = req.get(name, default)
    if not isinstance(v, int) or isinstance(v, bool):
        raise FrameError(f"field {name!r} must be an integer")
    return v


def _str_field(req, name):
    v = req.get(name)
    if not isinstance(v, str):
        raise FrameError(f"field {name!r} must be a string")
    return v


def handle_request(broker: Broker, req: dict) -> dict:
    """Execute one decoded request frame and build the response frame."""
    op = req["op"]
    if op == "ping":
        return {"op": "ok"}
    if op == "create_topic":
        broker.create_topic(_str_field(req, "topic"))
        return {"op": "ok", "topic": req["topic"]}
    if op == "publish":
        key = req.get("key")
        if key is not None and not isinstance(key, str):
            raise FrameError("field 'key' must be a string or null")
        offset = broker.publish(_str_field(req, "topic"), frames.unb64(req.get("payload")), key)
        return {"op": "ok", "topic": req["topic"], "offset": offset}
    if op == "poll":
        topic = _str_field(req, "topic")
        envs = broker.poll(
            topic,
            _str_field(req, "group"),
            _int_field(req, "max", 100),
            _int_field(req, "timeout_ms", 0),
        )
        msgs = [
            {"offset": e.offset, "timestamp": e.timestamp, "key": e.key, "payload": frames.b64(e.payload)}
            for e in envs
        ]
        return {"op": "messages", "topic": topic, "messages": msgs}
    if op == "seek":
        broker.seek(_str_field(req, "topic"), _str_field(req, "group"), _int_field(req, "offset"))
        return {"op": "ok"}
    if op == "cursor":
        return {"op": "ok", "offset": broker.cursor(_str_field(req, "topic"), _str_field(req, "group"))}
    if op == "end_offset":
        return {"op": "ok", "offset": broker.end_offset(_str_field(req, "topic"))}
    if op == "topics":
        return {"op": "ok", "topics": broker.topics()}
    raise FrameError(f"unknown op {op!r}")


def _error_frame(exc) -> dict:
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            return {"op": "error", "code": code, "error": str(exc)}
    return {"op": "error", "code": "internal", "error": repr(exc)}


class _Handler(socketserver.StreamRequestHandler):
    def setup(self):
        super().setup()
        with self.server.conn_lock:
            self.server.conns.add(self.connection)

    def finish(self):
        with self.server.conn_lock:
            self.server.conns.discard(self.connection)
        try:
            super().finish()
        except OSError:
            pass

    def handle(self):
        broker = self.server.broker
        while True:
            try:
                line = self.rfile.readline(frames.MAX_FRAME + 1)
            except (ConnectionError, OSError):
                return
            if not line:
                return
            if not line.strip():
                continue
            try:
                if not line.endswith(b"\n"):
                    # oversized frame: discard through the next newline
                    while line and not line.endswith(b"\n"):
                        line = self.rfile.readline(frames.MAX_FRAME + 1)
                    raise FrameError(f"frame longer than {frames.MAX_FRAME} bytes")
                resp = handle_request(broker, frames.decode(line))
            except Exception as exc:  # every failure becomes an error frame
                resp = _error_frame(exc)
            try:
                self.wfile.write(frames.encode(resp))
                self.wfile.flush()
            except (ConnectionError, OSError):
                return


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class BrokerServer:
    """Serves a broker on ``host:port`` (port 0 picks a free port)."""

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: int = 0):
        self.broker = broker
        self._server = _Server((host, port), _Handler)
        self._server.broker = broker
        self._server.conns = set()
        self._server.conn_lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> "BrokerServer":
        self._thread = threading.Thread(target=self._server.serve_forever, args=(0.05,),
                                        name="broker-tcp", daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        self._server.serve_forever()

    def close(self):
        """Stop accepting, drop open connections and wait for the accept loop."""
        if self._thread is not None:
            self._server.shutdown()
        self._server.server_close()
        with self._server.conn_lock:
            for conn in list(self._server.conns):
                try:
                    conn.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()


def serve_tcp(broker: Broker, bind_addr: str = "127.0.0.1:0") -> BrokerServer:
    host, port = parse_address(bind_addr)
    return BrokerServer(broker, host, port).start()


_EXC_BY_CODE = {
    "invalid_topic": InvalidTopicName,
    "payload_too_large": PayloadTooLarge,
}


class RemoteBroker:
    """Client speaking the line protocol; mirrors the :class:`Broker` API."""

    def __init__(self, addr: str, connect_timeout: float = 5.0):
        self.addr = addr
        host, port = parse_address(addr)
        try:
            self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        except ConnectionRefusedError as exc:
            raise BrokerConnectionError(f"broker at {addr} refused connection", retryable=True) from exc
        except socket.timeout as exc:
            raise BrokerConnectionError(f"timed out connecting to {addr}", retryable=True) from exc
        except OSError as exc:
            raise BrokerConnectionError(f"cannot reach broker at {addr}: {exc}", retryable=False) from exc
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._rfile = self._sock.makefile("rb")
        self._lock = threading.Lock()

    def close(self):
        try:
            self._rfile.close()
            self._sock.close()
        except OSError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def call(self, req: dict) -> dict:
        with self._lock:
            try:
                self._sock.sendall(frames.encode(req))
                line = self._rfile.readline(frames.MAX_FRAME + 1)
            except (ConnectionResetError, BrokenPipeError) as exc:
                raise BrokerConnectionError(f"connection to {self.addr} reset", retryable=True) from exc
            except OSError as exc:
                raise BrokerConnectionError(f"I/O error with {self.addr}: {exc}") from exc
        if not line:
            raise BrokerConnectionError(f"broker at {self.addr} closed the connection", retryable=True)
        resp = frames.decode(line)
        if resp["op"] == "error":
            code, msg = resp.get("code", "internal"), resp.get("error", "")
            if code == "unknown_topic":
                raise UnknownTopic(req.get("topic"))
            exc_type = _EXC_BY_CODE.get(code)
            raise exc_type(msg) if exc_type else RemoteError(code, msg)
        return resp

    def send_raw(self, line: bytes) -> dict:
        """Send pre-encoded bytes and return the decoded response frame (no error mapping)."""
        with self._lock:
            self._sock.sendall(line)
            return frames.decode(self._rfile.readline(frames.MAX_FRAME + 1))

    def ping(self):
        self.call({"op": "ping"})

    def create_topic(self, name: str) -> str:
        self.call({"op": "create_topic", "topic": name})
        return name

    def publish(self, topic: str, payload: bytes, key: str | None = None) -> int:
        resp = self.call({"op": "publish", "topic": topic, "key": key, "payload": frames.b64(bytes(payload))})
        return resp["offset"]

    def poll(self, topic: str, group: str, max_messages: int = 100, timeout_ms: int = 0) -> list[Envelope]:
        resp = self.call(
            {"op": "poll", "topic": topic, "group": group, "max": max_messages, "timeout_ms": timeout_ms}
        )
        return [frames.envelope_from(m, topic=topic) for m in resp["messages"]]

    def seek(self, topic: str, group: str, offset: int) -> None:
        self.call({"op": "seek", "topic": topic, "group": group, "offset": offset})

    def cursor(self, topic: str, group: str) -> int:
        return self.call({"op": "cursor", "topic": topic, "group": group})["offset"]

    def end_offset(self, topic: str) -> int:
        return self.call({"op": "end_offset", "topic": topic})["offset"]

    def topics(self) -> list[str]:
        return self.call({"op": "topics"})["topics"]

    def consumer(self, topic: str, group: str) -> ConsumerHandle:
        self.cursor(topic, group)
        return ConsumerHandle(self, topic, group)


def connect(addr: str, **kw) -> RemoteBroker:
    return RemoteBroker(addr, **kw)
