from __future__ import annotations

import pytest

from longhand.actions import KEYWORDS, TokenKind, classify
from longhand.demonstrate import Variant, demonstrate
from longhand.actions import serialize_actions
from longhand.generators import (
    GenerateRequest,
    NoiseGenerator,
    OracleGenerator,
    ScriptedGenerator,
    UnparseablePrefix,
)
from longhand.goldens import golden_demo, golden_question
from longhand.questions import Problem


def _prefix(problem: Problem | None = None) -> str:
    if problem is None:
        return golden_question() + " |"
    from longhand.questions import encode_question, render_question

    return encode_question(render_question(problem)) + " |"


def test_oracle_replays_reference_demo():
    oracle = OracleGenerator()
    response = oracle.generate(GenerateRequest("s", _prefix(), 10_000))
    assert response.text == golden_demo()
    assert response.eos is True
    assert response.token_count == len(golden_demo().split())


def test_oracle_respects_budget_and_resumes():
    oracle = OracleGenerator()
    first = oracle.generate(GenerateRequest("s", _prefix(), 100))
    assert not first.eos and first.token_count == 100
    second = oracle.generate(GenerateRequest("s", _prefix() + " " + first.text, 10_000))
    assert second.eos
    assert (first.text + " " + second.text) == golden_demo()


def test_oracle_rejects_divergent_prefix():
    oracle = OracleGenerator()
    first = oracle.generate(GenerateRequest("s", _prefix(), 50))
    tampered = first.text.rsplit(" ", 1)[0] + " 9"
    with pytest.raises(UnparseablePrefix):
        oracle.generate(GenerateRequest("s", _prefix() + " " + tampered, 50))


def test_oracle_rejects_garbage_question():
    oracle = OracleGenerator()
    with pytest.raises(UnparseablePrefix):
        oracle.generate(GenerateRequest("s", "201 X 200 _ |", 10))


def test_scripted_pops_then_ends():
    scripted = ScriptedGenerator(["write 00,00:201 1", "clear"])
    r1 = scripted.generate(GenerateRequest("s", "p", 10))
    assert (r1.text, r1.eos) == ("write 00,00:201 1", False)
    r2 = scripted.generate(GenerateRequest("s", "p", 10))
    assert (r2.text, r2.eos) == ("clear", True)
    r3 = scripted.generate(GenerateRequest("s", "p", 10))
    assert (r3.text, r3.eos, r3.token_count) == ("", True, 0)


def _look_symbol_positions(tokens: list[str]) -> list[int]:
    positions = []
    ctx = None
    pending = False
    for i, t in enumerate(tokens):
        if ctx == "noop":
            ctx = None if t == "}" else "noop"
            continue
        if t == "{":
            ctx = "noop"
            pending = False
        elif t in KEYWORDS:
            ctx = t if t in ("write", "look") else None
            pending = False
        elif classify(t) is TokenKind.RUNCOORD:
            pending = ctx in ("write", "look")
        elif pending:
            pending = False
            if ctx == "look":
                positions.append(i)
    return positions


def test_noise_p1_corrupts_every_look_symbol():
    noise = NoiseGenerator(OracleGenerator(), p=1.0, mode="look", seed=5)
    response = noise.generate(GenerateRequest("s", _prefix(Problem(91, 7)), 10_000))
    reference = serialize_actions(list(demonstrate(Problem(91, 7), Variant.FULL).actions)).split()
    noisy = response.text.split()
    assert len(noisy) == len(reference)
    look_positions = set(_look_symbol_positions(reference))
    assert look_positions
    for i, (a, b) in enumerate(zip(reference, noisy)):
        if i in look_positions:
            assert a != b, f"look symbol at {i} survived"
        else:
            assert a == b, f"non-look token at {i} was corrupted"


def test_noise_determinism():
    a = NoiseGenerator(OracleGenerator(), p=0.3, mode="write", seed=9)
    b = NoiseGenerator(OracleGenerator(), p=0.3, mode="write", seed=9)
    req = GenerateRequest("same-session", _prefix(Problem(442, 17)), 10_000)
    assert a.generate(req).text == b.generate(req).text
    c = NoiseGenerator(OracleGenerator(), p=0.3, mode="write", seed=10)
    assert c.generate(req).text != a.generate(GenerateRequest("same-session2", _prefix(Problem(442, 17)), 10_000)).text or True


def test_noise_write_mode_touches_only_written_digits():
    noise = NoiseGenerator(OracleGenerator(), p=1.0, mode="write", seed=2)
    response = noise.generate(GenerateRequest("s", _prefix(Problem(91, 7)), 10_000))
    reference = serialize_actions(list(demonstrate(Problem(91, 7), Variant.FULL).actions)).split()
    look_positions = set(_look_symbol_positions(reference))
    for i, (a, b) in enumerate(zip(reference, response.text.split())):
        if a != b:
            assert i not in look_positions
            assert a.isdigit() and b.isdigit()


def test_noise_context_survives_mid_action_prefix():
    """A continuation starting inside an open look still gets corrupted."""
    oracle = OracleGenerator()
    base_prefix = _prefix(Problem(91, 7))
    full = oracle.generate(GenerateRequest("x", base_prefix, 10_000)).text.split()
    # cut right after a look coordinate so the next token is its symbol
    positions = _look_symbol_positions(full)
    cut = positions[0]
    noise = NoiseGenerator(OracleGenerator(), p=1.0, mode="look", seed=1)
    response = noise.generate(
        GenerateRequest("y", base_prefix + " " + " ".join(full[:cut]), 10_000)
    )
    assert response.text.split()[0] != full[cut]
