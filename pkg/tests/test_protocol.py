from __future__ import annotations

import json
import socket
import sys

import pytest

from longhand.generators import (
    GenerateRequest,
    GeneratorUnavailable,
    OracleGenerator,
    ScriptedGenerator,
)
from longhand.goldens import golden_question
from longhand.harness import run_session
from longhand.protocol import PROTOCOL_VERSION, GeneratorServer, connect
from longhand.questions import Problem

from conftest import random_problem


@pytest.fixture
def oracle_server():
    server = GeneratorServer("tcp:127.0.0.1:0", OracleGenerator, parallel=True)
    server.start()
    yield server
    server.stop()


def _raw_exchange(address: str, frames: list[dict | str]) -> list[dict]:
    host, _, port = address[4:].rpartition(":")
    replies = []
    with socket.create_connection((host, int(port)), timeout=10) as sock:
        rfile = sock.makefile("rb")
        wfile = sock.makefile("wb")
        for frame in frames:
            payload = frame if isinstance(frame, str) else json.dumps(frame)
            wfile.write(payload.encode() + b"\n")
            wfile.flush()
            line = rfile.readline()
            if not line:
                replies.append({"_closed": True})
                break
            replies.append(json.loads(line))
    return replies


def test_scripted_loopback():
    server = GeneratorServer("tcp:127.0.0.1:0", lambda: ScriptedGenerator(["clear"]))
    server.start()
    try:
        remote = connect(server.address)
        response = remote.generate(GenerateRequest("s", "ignored", 8))
        assert (response.text, response.eos) == ("clear", True)
        remote.close()
    finally:
        server.stop()


def test_hello_handshake_and_generate(oracle_server):
    replies = _raw_exchange(
        oracle_server.address,
        [
            {"type": "hello", "protocol_version": PROTOCOL_VERSION},
            {
                "type": "generate",
                "session_id": "t",
                "prefix": golden_question() + " |",
                "max_new_tokens": 5,
            },
        ],
    )
    assert replies[0]["type"] == "hello"
    assert replies[0]["protocol_version"] == PROTOCOL_VERSION
    assert "parallel" in replies[0]
    assert replies[1]["text"].startswith("write 00,02:201 1")
    assert replies[1]["eos"] is False
    assert replies[1]["token_count"] == 5


def test_version_mismatch_refused(oracle_server):
    replies = _raw_exchange(
        oracle_server.address, [{"type": "hello", "protocol_version": "teach-demo/0"}]
    )
    assert replies[0]["type"] == "error"


def test_malformed_frame_errors_and_closes(oracle_server):
    replies = _raw_exchange(
        oracle_server.address,
        [
            {"type": "hello", "protocol_version": PROTOCOL_VERSION},
            "this is not json {",
            {"type": "generate", "session_id": "x", "prefix": "p", "max_new_tokens": 1},
        ],
    )
    assert replies[0]["type"] == "hello"
    assert replies[1]["type"] == "error"
    assert replies[2] == {"_closed": True}


def test_unknown_frame_type_errors(oracle_server):
    replies = _raw_exchange(
        oracle_server.address,
        [
            {"type": "hello", "protocol_version": PROTOCOL_VERSION},
            {"type": "sample", "prefix": "p"},
        ],
    )
    assert replies[1]["type"] == "error"


def test_generator_error_becomes_error_frame(oracle_server):
    remote = connect(oracle_server.address)
    with pytest.raises(GeneratorUnavailable):
        remote.generate(GenerateRequest("s", "201 X 200 _ |", 10))
    remote.close()


def test_remote_oracle_equals_in_process_oracle(oracle_server, rng):
    for i in range(8):
        problem = random_problem(rng, max_digits=4)
        local = run_session(OracleGenerator(), problem, session_id=f"l{i}")
        remote_gen = connect(oracle_server.address)
        remote = run_session(remote_gen, problem, session_id=f"r{i}")
        remote_gen.close()
        assert local.result == remote.result
        assert local.transcript == remote.transcript


def test_pipe_transport_spawns_subprocess():
    remote = connect(f"pipe:{sys.executable} -m longhand.cli serve-oracle --listen stdio")
    session = run_session(remote, Problem(91, 7), session_id="pipe")
    remote.close()
    assert session.correct and session.answer == 0


def test_connect_refuses_unknown_scheme():
    with pytest.raises(GeneratorUnavailable):
        connect("carrier-pigeon:route66")
