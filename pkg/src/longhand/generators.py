"""Continuation generators the evaluation harness can drive.

All generators answer GenerateRequests with text continuations and do
their own token accounting (whitespace lexemes for the built-ins).  The
oracle replays the canonical demonstration for the question it finds in
the prefix, strictly matching the committed action suffix against the
canonical token stream so that any divergence (a corrupted write, say)
surfaces as UnparseablePrefix rather than silently resynchronizing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .actions import KEYWORDS, TokenKind, classify
from .demonstrate import DEFAULT_GLYPH, Variant, demonstrate
from .questions import decode_question, parse_question

NOISE_ALPHABET = "0123456789_"


class GeneratorUnavailable(RuntimeError):
    """Transport failure, protocol violation, or a refused request."""


class UnparseablePrefix(ValueError):
    """The oracle could not line the prefix up with a known demonstration."""


@dataclass(frozen=True)
class GenerateRequest:
    session_id: str
    prefix: str
    max_new_tokens: int

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")


@dataclass(frozen=True)
class GenerateResponse:
    text: str
    eos: bool
    token_count: int


@dataclass
class _OracleSession:
    canonical: list[str]
    cursor: int  # canonical tokens handed out so far


class OracleGenerator:
    """Replays demonstrate() output for the question parsed from the prefix.

    Per-session state keeps the canonical token list and a cursor; each
    request re-anchors the cursor by exact suffix match (scanning downward
    from the cursor, since forcing can only truncate what we emitted).
    """

    def __init__(self, glyph: str = DEFAULT_GLYPH):
        self.glyph = glyph
        self._sessions: dict[str, _OracleSession] = {}

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        tokens = request.prefix.split()
        state = self._sessions.get(request.session_id)
        fresh = state is None
        if "|" in tokens:
            bar = tokens.index("|")
            if fresh:
                try:
                    problem = parse_question(decode_question(" ".join(tokens[:bar])))
                except ValueError as exc:
                    raise UnparseablePrefix(str(exc)) from exc
                demo = demonstrate(problem, Variant.FULL, self.glyph)
                from .actions import serialize_actions

                state = _OracleSession(serialize_actions(list(demo.actions)).split(), 0)
                self._sessions[request.session_id] = state
            suffix = tokens[bar + 1 :]
        else:
            if fresh:
                raise UnparseablePrefix("no question visible and session unknown")
            suffix = tokens

        canonical = state.canonical
        length = len(suffix)
        # A known session can only have been truncated, so scan down from the
        # cursor; a fresh one anchors at the earliest consistent position.
        if fresh:
            candidates = range(length, len(canonical) + 1)
        else:
            candidates = range(min(state.cursor, len(canonical)), length - 1, -1)
        anchor = next(
            (end for end in candidates if canonical[end - length : end] == suffix), None
        )
        if anchor is None:
            raise UnparseablePrefix(
                f"session {request.session_id}: prefix suffix diverges from the demonstration"
            )
        chunk = canonical[anchor : anchor + request.max_new_tokens]
        state.cursor = anchor + len(chunk)
        return GenerateResponse(
            text=" ".join(chunk),
            eos=state.cursor >= len(canonical),
            token_count=len(chunk),
        )

    def close(self) -> None:
        self._sessions.clear()


class ScriptedGenerator:
    """Pops canned responses; an exhausted script yields empty text + eos."""

    def __init__(self, responses: list[str | GenerateResponse]):
        self._queue = list(responses)

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        if not self._queue:
            return GenerateResponse("", True, 0)
        item = self._queue.pop(0)
        if isinstance(item, GenerateResponse):
            return item
        return GenerateResponse(item, not self._queue, len(item.split()))

    def close(self) -> None:
        self._queue.clear()


class NoiseGenerator:
    """Wraps a generator and corrupts some of its output tokens.

    mode "look" flips look-pair symbols; mode "write" flips written digit
    symbols.  Corruption is deterministic given (seed, session_id) and the
    request sequence.  Context (are we inside a look? a no-op?) is derived
    from the tail of the request prefix, so regeneration after a forcing
    truncation classifies tokens correctly.
    """

    def __init__(self, delegate, p: float, mode: str = "look", seed: int = 0):
        if mode not in ("look", "write"):
            raise ValueError(f"noise mode must be look or write, got {mode!r}")
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be within [0, 1]")
        self.delegate = delegate
        self.p = p
        self.mode = mode
        self.seed = seed
        self._rngs: dict[str, random.Random] = {}
        self.corruption_counts: dict[str, int] = {}

    def _rng(self, session_id: str) -> random.Random:
        if session_id not in self._rngs:
            self._rngs[session_id] = random.Random(f"{self.seed}:{session_id}")
        return self._rngs[session_id]

    @staticmethod
    def _context_tail(prefix_tokens: list[str]) -> list[str]:
        """Shortest prefix tail that pins down the parse context."""
        for i in range(len(prefix_tokens) - 1, -1, -1):
            t = prefix_tokens[i]
            if t in KEYWORDS or t in ("{", "}"):
                return prefix_tokens[i:]
        return []

    @staticmethod
    def _advance(ctx: str | None, pending: bool, token: str) -> tuple[str | None, bool, bool]:
        """One automaton step; the last flag marks 'token is a pair symbol'."""
        if ctx == "noop":
            return (None if token == "}" else "noop"), False, False
        if token == "{":
            return "noop", False, False
        if token in KEYWORDS:
            return (token if token in ("write", "look") else None), False, False
        if classify(token) is TokenKind.RUNCOORD:
            return ctx, ctx in ("write", "look"), False
        return ctx, False, pending

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        response = self.delegate.generate(request)
        rng = self._rng(request.session_id)
        ctx: str | None = None
        pending = False
        for t in self._context_tail(request.prefix.split()):
            ctx, pending, _ = self._advance(ctx, pending, t)
        out: list[str] = []
        for t in response.text.split():
            sym_ctx = ctx  # context the symbol belongs to, set before the step
            ctx, pending, is_symbol = self._advance(ctx, pending, t)
            out.append(self._maybe_corrupt(t, sym_ctx, rng, request.session_id) if is_symbol else t)
        return GenerateResponse(" ".join(out), response.eos, response.token_count)

    def _maybe_corrupt(self, token: str, ctx: str | None, rng: random.Random, session_id: str) -> str:
        if ctx == "look" and self.mode == "look":
            candidates = [c for c in NOISE_ALPHABET if c != token]
        elif ctx == "write" and self.mode == "write" and token.isdigit():
            candidates = [c for c in "0123456789" if c != token]
        else:
            return token
        if rng.random() < self.p:
            self.corruption_counts[session_id] = self.corruption_counts.get(session_id, 0) + 1
            return rng.choice(candidates)
        return token

    def close(self) -> None:
        self.delegate.close()
