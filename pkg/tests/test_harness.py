from __future__ import annotations

import random

from longhand.actions import ParseMode, parse_actions, execute
from longhand.generators import NoiseGenerator, OracleGenerator, ScriptedGenerator
from longhand.goldens import golden_demo
from longhand.grid import Grid
from longhand.harness import (
    ForcingMode,
    MalformedPolicy,
    SessionConfig,
    SessionStatus,
    extract_answer,
    run_session,
)
from longhand.questions import Problem

from conftest import random_problem


def test_oracle_session_reference_problem():
    session = run_session(OracleGenerator(), Problem(1862, 16))
    assert session.status is SessionStatus.ANSWERED
    assert session.answer == 6
    assert session.correct
    assert session.forcing_events == []
    assert session.transcript == golden_demo()


def test_look_noise_is_fully_repaired(rng: random.Random):
    for i in range(15):
        problem = random_problem(rng, max_digits=4)
        noise = NoiseGenerator(OracleGenerator(), p=0.05, mode="look", seed=i)
        session = run_session(noise, problem, session_id=f"n{i}")
        assert session.correct, problem
        corrupted = noise.corruption_counts.get(f"n{i}", 0)
        if corrupted:
            assert session.forcing_events, problem
        for event in session.forcing_events:
            # the substituted symbol is what the grid held at that moment
            assert event.env_symbol != event.model_symbol


def test_forcing_soundness_after_each_event():
    """At every forcing offset the transcript carries the grid's symbol."""
    noise = NoiseGenerator(OracleGenerator(), p=0.1, mode="look", seed=4)
    session = run_session(noise, Problem(1862, 16), session_id="fs")
    assert session.forcing_events
    tokens = session.transcript.split()
    for event in session.forcing_events:
        assert tokens[event.transcript_offset] == event.env_symbol


def test_transcript_replay_reproduces_grid(rng: random.Random):
    for i in range(10):
        problem = random_problem(rng, max_digits=4)
        noise = NoiseGenerator(OracleGenerator(), p=0.08, mode="look", seed=100 + i)
        session = run_session(noise, problem, session_id=f"tr{i}")
        replay = Grid()
        for action in parse_actions(session.transcript, ParseMode.TOLERANT).actions:
            execute(action, replay)
        assert replay.cells == session.grid.cells


def test_scripted_never_finishing_is_unterminated():
    config = SessionConfig(trim_tokens=2, max_rounds=3, max_new_tokens=8)
    endless = ScriptedGenerator(
        [f"write {i:02d},00:201 1" for i in range(3)]
        + ["{ still going }"]
    )
    session = run_session(endless, Problem(10, 3), config)
    assert session.status is SessionStatus.UNTERMINATED
    assert not session.correct


def test_eos_without_answer_is_unterminated():
    session = run_session(ScriptedGenerator([]), Problem(10, 3))
    assert session.status is SessionStatus.UNTERMINATED
    assert session.answer is None


def test_window_recycling_drops_prefix_tokens():
    session = run_session(OracleGenerator(), Problem(1862, 16), SessionConfig(max_new_tokens=256))
    # 1603 demo tokens at 256/round forces several recycles; the grid still
    # carries the state and the answer is extracted from the transcript
    assert session.recycles >= 4
    assert session.correct


def test_round_cap_respected():
    config = SessionConfig(max_new_tokens=16, max_rounds=2, trim_tokens=4)
    session = run_session(OracleGenerator(), Problem(98765432, 7), config)
    assert session.status is SessionStatus.UNTERMINATED
    assert session.recycles == 3  # the cap was hit after max_rounds recycles


def test_write_noise_degrades():
    correct = 0
    for i in range(10):
        noise = NoiseGenerator(OracleGenerator(), p=0.3, mode="write", seed=i)
        session = run_session(noise, Problem(1862, 16), session_id=f"w{i}")
        correct += session.correct
    assert correct < 10  # heavy write corruption cannot stay perfect


def test_generator_failure_aborts():
    class Broken:
        def generate(self, request):
            raise __import__("longhand.generators", fromlist=["GeneratorUnavailable"]).GeneratorUnavailable("boom")

    session = run_session(Broken(), Problem(10, 3))
    assert session.status is SessionStatus.ABORTED


def test_malformed_abort_policy():
    config = SessionConfig(malformed_policy=MalformedPolicy.ABORT)
    session = run_session(ScriptedGenerator(["write xx yy zz"]), Problem(10, 3), config)
    assert session.status is SessionStatus.ABORTED


def test_malformed_skiplog_policy_keeps_going():
    script = ["junk !! tokens { final remainder is 1 }"]
    session = run_session(ScriptedGenerator(script), Problem(10, 3))
    assert session.status is SessionStatus.ANSWERED
    assert session.answer == 1
    assert session.correct
    assert session.diagnostics


def test_eager_forcing_supplies_every_look(rng: random.Random):
    config = SessionConfig(forcing_mode=ForcingMode.EAGER)
    session = run_session(OracleGenerator(), Problem(91, 7), config)
    assert session.correct
    looks = sum(
        len(a.pairs)
        for a in parse_actions(session.transcript, ParseMode.TOLERANT).actions
        if a.__class__.__name__ == "Look"
    )
    assert len(session.forcing_events) == looks


def test_session_stops_at_final_noop_even_without_eos():
    script = ["write 02,00:201 5 { final remainder is 1 } write 03,00:201 9 more"]
    session = run_session(ScriptedGenerator(script), Problem(10, 3))
    assert session.status is SessionStatus.ANSWERED
    assert session.answer == 1
    assert session.transcript.endswith("{ final remainder is 1 }")


def test_extract_answer_forms():
    assert extract_answer("clear { final remainder is 6 }") == 6
    assert extract_answer("{ final remainder is 1 0 4 }") == 104
    assert extract_answer("{ final remainder is 104 }") == 104
    assert extract_answer("{ remainder maybe 3 } clear") is None
    assert extract_answer("{ final remainder is 2 } { final remainder is 7 }") == 7


def test_count_mismatches_logged_not_forced():
    # a stale count token with the right symbol: no forcing, one log entry
    script = ["write 00,02:201 1 look 00,02:209 1 { final remainder is 1 }"]
    session = run_session(ScriptedGenerator(script), Problem(10, 3))
    assert session.forcing_events == []
    assert session.count_mismatches == 1
    assert session.answer == 1
