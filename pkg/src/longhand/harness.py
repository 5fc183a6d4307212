"""Run one evaluation session of a generator against the grid environment.

The generator receives the encoded question as a prefix and produces
action text.  The harness interprets that text incrementally, applies it
to a grid, and *forces* look observations: whenever a generated look
symbol contradicts the grid (lazy mode), the transcript is truncated at
that symbol, the environment's symbol is substituted, and generation
restarts from the amended prefix.  Eager mode instead halts at every look
coordinate and appends the grid's symbol itself.  Rounds that end without
an end-of-sequence are recycled by dropping the oldest tokens from the
window; the grid, not the window, is what carries state across rounds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from .actions import (
    IncrementalParser,
    Look,
    NoOp,
    ParseDiagnostic,
    ParseMode,
    execute,
    parse_actions,
)
from .demonstrate import final_remainder_from_noop
from .generators import GenerateRequest, GeneratorUnavailable, UnparseablePrefix
from .grid import Grid, RangeError
from .questions import Problem, encode_question, render_question

log = logging.getLogger(__name__)


class ForcingMode(Enum):
    LAZY = "lazy"    # intervene only when the generated symbol is wrong
    EAGER = "eager"  # halt at every look coordinate and supply the symbol


class MalformedPolicy(Enum):
    SKIP_LOG = "skiplog"
    ABORT = "abort"


class SessionStatus(Enum):
    ANSWERED = "answered"
    UNTERMINATED = "unterminated"
    ABORTED = "aborted"


@dataclass(frozen=True)
class SessionConfig:
    trim_tokens: int = 500
    max_rounds: int = 25
    max_new_tokens: int = 1024
    forcing_mode: ForcingMode = ForcingMode.LAZY
    malformed_policy: MalformedPolicy = MalformedPolicy.SKIP_LOG
    max_generate_calls: int = 2000  # hard stop against non-terminating generators

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.trim_tokens < 1:
            raise ValueError("trim_tokens must be positive")


@dataclass(frozen=True)
class ForcingEvent:
    x: int
    y: int
    model_symbol: str  # what the generator produced ("" if it never got there)
    env_symbol: str
    transcript_offset: int  # token index within the transcript


@dataclass(frozen=True)
class SessionResult:
    status: SessionStatus
    answer: int | None
    correct: bool
    forcing_event_count: int
    rounds_used: int


@dataclass
class Session:
    problem: Problem
    grid: Grid = field(default_factory=Grid)
    transcript: str = ""
    rounds_used: int = 0  # generate calls, including forcing restarts
    recycles: int = 0     # window-trim repetitions, capped by max_rounds
    forcing_events: list[ForcingEvent] = field(default_factory=list)
    diagnostics: list[ParseDiagnostic] = field(default_factory=list)
    execution_errors: list[str] = field(default_factory=list)
    count_mismatches: int = 0  # look count-token disagreements (logged, never forced)
    status: SessionStatus = SessionStatus.UNTERMINATED
    answer: int | None = None

    @property
    def correct(self) -> bool:
        return self.status is SessionStatus.ANSWERED and self.answer == self.problem.remainder

    @property
    def result(self) -> SessionResult:
        return SessionResult(
            self.status, self.answer, self.correct, len(self.forcing_events), self.rounds_used
        )


def extract_answer(transcript: str) -> int | None:
    """Parse the last ``{ final remainder is N }`` no-op; digits may be
    spaced or contiguous."""
    result = parse_actions(transcript, ParseMode.TOLERANT)
    answer = None
    for action in result.actions:
        if isinstance(action, NoOp):
            value = final_remainder_from_noop(action)
            if value is not None:
                answer = value
    return answer


class _Abort(Exception):
    pass


class _Finished(Exception):
    def __init__(self, answer: int | None):
        self.answer = answer


def run_session(
    generator,
    problem: Problem,
    config: SessionConfig = SessionConfig(),
    session_id: str | None = None,
) -> Session:
    """Drive one generator through one question; see the module docstring."""
    if session_id is None:
        session_id = f"{problem.dividend}/{problem.divisor}/{problem.template.value}"
    session = Session(problem)
    prefix_tokens = encode_question(render_question(problem)).split() + ["|"]
    stream: list[str] = list(prefix_tokens)  # full committed token stream
    t_start = len(stream)                    # where the transcript begins
    window_start = 0                         # recycling trims advance this
    parser = IncrementalParser(strict=False)
    grid = session.grid

    def bad_execution(message: str) -> None:
        session.execution_errors.append(message)
        if config.malformed_policy is MalformedPolicy.ABORT:
            raise _Abort()

    def run_completed(events) -> None:
        for ev in events:
            if isinstance(ev.action, Look):
                continue  # look pairs were checked as they completed
            try:
                execute(ev.action, grid)
            except RangeError as exc:
                bad_execution(str(exc))
                continue
            if isinstance(ev.action, NoOp):
                value = final_remainder_from_noop(ev.action)
                if value is not None:
                    raise _Finished(value)

    def check_new_look_pair() -> bool:
        """Validate the just-completed look pair.  True => lazy forcing
        fired and the rest of the round must be discarded."""
        rc, sym = parser.pending_pairs()[-1]
        try:
            env = grid.read(rc.x, rc.y)
            env_count = grid.run_count(rc.x, rc.y) + 200
        except RangeError as exc:
            bad_execution(str(exc))
            return False
        if rc.count_token != env_count:
            session.count_mismatches += 1
        if sym == env:
            return False
        stream[-1] = env
        parser.amend_last_pair(env)
        session.forcing_events.append(
            ForcingEvent(rc.x, rc.y, sym, env, len(stream) - 1 - t_start)
        )
        return True

    def eager_force(model_symbol: str) -> None:
        """Supply the environment's symbol for the pending look coordinate."""
        rc = parser.open_look_pair
        assert rc is not None
        try:
            env = grid.read(rc.x, rc.y)
            if rc.count_token != grid.run_count(rc.x, rc.y) + 200:
                session.count_mismatches += 1
        except RangeError as exc:
            bad_execution(str(exc))
            env = "_"
        stream.append(env)
        run_completed(parser.feed([env]))
        session.forcing_events.append(
            ForcingEvent(rc.x, rc.y, model_symbol, env, len(stream) - 1 - t_start)
        )

    try:
        while session.rounds_used < config.max_generate_calls:
            session.rounds_used += 1
            prefix = " ".join(stream[window_start:])
            try:
                response = generator.generate(
                    GenerateRequest(session_id, prefix, config.max_new_tokens)
                )
            except (GeneratorUnavailable, UnparseablePrefix) as exc:
                log.debug("session %s aborted: %s", session_id, exc)
                raise _Abort()
            round_tokens = response.text.split()
            forced = False
            for token in round_tokens:
                if config.forcing_mode is ForcingMode.EAGER and parser.open_look_pair is not None:
                    eager_force(model_symbol=token)  # discards the model's symbol
                    forced = True
                    break
                pairs_before = len(parser.pending_pairs())
                stream.append(token)
                events = parser.feed([token])
                completed_pair = len(parser.pending_pairs()) == pairs_before + 1
                if completed_pair and parser.open_keyword == "look" and check_new_look_pair():
                    forced = True
                    break
                run_completed(events)
            if forced:
                continue  # regenerate from the amended prefix; not a recycle
            if config.forcing_mode is ForcingMode.EAGER and parser.open_look_pair is not None:
                eager_force(model_symbol="")  # the round ended on a bare coordinate
                continue
            if response.eos:
                raise _Finished(extract_answer(" ".join(stream[t_start:])))
            session.recycles += 1
            if session.recycles > config.max_rounds:
                break
            window_start = min(window_start + config.trim_tokens, len(stream))
        session.status = SessionStatus.UNTERMINATED
    except _Abort:
        session.status = SessionStatus.ABORTED
    except _Finished as fin:
        session.answer = fin.answer
        session.status = (
            SessionStatus.ANSWERED if fin.answer is not None else SessionStatus.UNTERMINATED
        )
    if config.malformed_policy is MalformedPolicy.ABORT and parser.diagnostics:
        session.status = SessionStatus.ABORTED
    session.diagnostics.extend(parser.diagnostics)
    session.transcript = " ".join(stream[t_start:])
    return session
