"""Newline-delimited JSON wire protocol for remote generators.

One session per connection; frames are UTF-8 JSON objects, one per line,
at most 16 MiB.  A hello handshake carrying protocol_version "teach-demo/1"
precedes traffic; version mismatches and malformed frames are answered
with an error frame and the connection is closed.  Transports are byte
streams: ``tcp:HOST:PORT`` or ``pipe:COMMAND ...`` (a spawned subprocess
speaking the protocol on stdin/stdout).
"""

from __future__ import annotations

import json
import shlex
import socket
import socketserver
import subprocess
import sys
import threading

from .generators import GenerateRequest, GenerateResponse, GeneratorUnavailable

PROTOCOL_VERSION = "teach-demo/1"
MAX_FRAME_BYTES = 16 * 1024 * 1024


class ProtocolError(GeneratorUnavailable):
    pass


def write_frame(stream, obj: dict) -> None:
    data = (json.dumps(obj, separators=(",", ":")) + "\n").encode("utf-8")
    if len(data) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(data)} bytes exceeds the 16 MiB limit")
    stream.write(data)
    stream.flush()


def read_frame(stream) -> dict | None:
    """Read one frame; None at EOF; ProtocolError on garbage or oversize."""
    line = stream.readline(MAX_FRAME_BYTES + 1)
    if not line:
        return None
    if len(line) > MAX_FRAME_BYTES:
        raise ProtocolError("incoming frame exceeds the 16 MiB limit")
    try:
        obj = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("frame is not a JSON object")
    return obj


class RemoteGenerator:
    """Client side of the protocol; owned by exactly one session."""

    def __init__(self, reader, writer, closer=None):
        self._reader = reader
        self._writer = writer
        self._closer = closer
        self.parallel = False
        self._hello()

    def _hello(self) -> None:
        write_frame(self._writer, {"type": "hello", "protocol_version": PROTOCOL_VERSION})
        reply = read_frame(self._reader)
        if reply is None:
            raise GeneratorUnavailable("peer closed during handshake")
        if reply.get("type") == "error":
            raise GeneratorUnavailable(f"peer refused: {reply.get('message', '')}")
        if reply.get("type") != "hello" or reply.get("protocol_version") != PROTOCOL_VERSION:
            raise GeneratorUnavailable(f"bad handshake reply: {reply!r}")
        self.parallel = bool(reply.get("parallel", False))

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        try:
            write_frame(
                self._writer,
                {
                    "type": "generate",
                    "session_id": request.session_id,
                    "prefix": request.prefix,
                    "max_new_tokens": request.max_new_tokens,
                },
            )
            reply = read_frame(self._reader)
        except (OSError, ValueError) as exc:
            raise GeneratorUnavailable(f"transport failure: {exc}") from exc
        if reply is None:
            raise GeneratorUnavailable("connection closed mid-session")
        if reply.get("type") == "error":
            raise GeneratorUnavailable(f"peer error: {reply.get('message', '')}")
        try:
            return GenerateResponse(str(reply["text"]), bool(reply["eos"]), int(reply["token_count"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise GeneratorUnavailable(f"malformed response frame: {reply!r}") from exc

    def close(self) -> None:
        if self._closer is not None:
            try:
                self._closer()
            except OSError:
                pass
            self._closer = None


def connect(address: str) -> RemoteGenerator:
    """Open a client connection.  ``tcp:HOST:PORT`` or ``pipe:CMD ARGS...``."""
    if address.startswith("tcp:"):
        host, _, port = address[4:].rpartition(":")
        try:
            sock = socket.create_connection((host or "127.0.0.1", int(port)), timeout=60)
        except OSError as exc:
            raise GeneratorUnavailable(f"cannot reach {address}: {exc}") from exc
        reader = sock.makefile("rb")
        writer = sock.makefile("wb")
        return RemoteGenerator(reader, writer, closer=sock.close)
    if address.startswith("pipe:"):
        cmd = shlex.split(address[5:])
        try:
            proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise GeneratorUnavailable(f"cannot spawn {cmd!r}: {exc}") from exc

        def stop():
            proc.stdin.close()
            proc.wait(timeout=10)

        return RemoteGenerator(proc.stdout, proc.stdin, closer=stop)
    raise GeneratorUnavailable(f"unknown address scheme: {address!r}")


def _serve_streams(reader, writer, generator_factory, parallel: bool = False) -> None:
    """Protocol loop for one connection (one session)."""
    try:
        hello = read_frame(reader)
    except ProtocolError as exc:
        write_frame(writer, {"type": "error", "message": str(exc)})
        return
    if hello is None:
        return
    if hello.get("type") != "hello" or hello.get("protocol_version") != PROTOCOL_VERSION:
        write_frame(
            writer,
            {"type": "error", "message": f"unsupported protocol, want {PROTOCOL_VERSION}"},
        )
        return
    write_frame(
        writer,
        {"type": "hello", "protocol_version": PROTOCOL_VERSION, "parallel": parallel},
    )
    generator = generator_factory()
    try:
        while True:
            try:
                frame = read_frame(reader)
            except ProtocolError as exc:
                write_frame(writer, {"type": "error", "message": str(exc)})
                return
            if frame is None:
                return
            if frame.get("type") != "generate":
                write_frame(writer, {"type": "error", "message": f"unknown frame type {frame.get('type')!r}"})
                return
            try:
                request = GenerateRequest(
                    str(frame["session_id"]), str(frame["prefix"]), int(frame["max_new_tokens"])
                )
            except (KeyError, TypeError, ValueError) as exc:
                write_frame(writer, {"type": "error", "message": f"bad generate frame: {exc}"})
                return
            try:
                response = generator.generate(request)
            except Exception as exc:  # surface generator errors to the peer
                write_frame(writer, {"type": "error", "message": f"{type(exc).__name__}: {exc}"})
                return
            write_frame(
                writer,
                {"text": response.text, "eos": response.eos, "token_count": response.token_count},
            )
    finally:
        close = getattr(generator, "close", None)
        if close:
            close()


class GeneratorServer:
    """TCP server hosting a generator factory, one generator per connection."""

    def __init__(self, address: str, generator_factory, parallel: bool = True):
        if not address.startswith("tcp:"):
            raise ValueError(f"serve needs a tcp: address, got {address!r}")
        host, _, port = address[4:].rpartition(":")
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                try:
                    _serve_streams(self.rfile, self.wfile, generator_factory, outer.parallel)
                except (OSError, ValueError):
                    pass  # client went away

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self.parallel = parallel
        self._server = Server((host or "127.0.0.1", int(port)), Handler)
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        host, port = self._server.server_address[:2]
        return f"tcp:{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def serve_stdio(generator_factory, parallel: bool = False) -> None:
    """Serve one session over stdin/stdout (the pipe: transport's far end)."""
    _serve_streams(sys.stdin.buffer, sys.stdout.buffer, generator_factory, parallel)
