"""Lexer, parser, serializer and interpreter for the demonstration language.

A demonstration is a whitespace-separated token stream built from four
action forms::

    write XX,YY:2NN s [XX,YY:2NN s ...]
    look  XX,YY:2NN s [XX,YY:2NN s ...]
    clear
    { arbitrary tokens without braces }

``XX,YY:2NN`` is a run-coordinate: zero-padded column and row plus a
200-based token carrying the consecutive-symbol count at that cell.
Multi-pair write/look actions are shorthand for a sequence of single-pair
ones.  Serialization round-trips byte-exactly; parsing has a strict mode
(training data must be perfect) and a tolerant streaming mode (model
output is salvaged token by token).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .grid import Grid

KEYWORDS = ("write", "look", "clear")
_RUNCOORD_RE = re.compile(r"^(\d\d),(\d\d):(2\d\d)$")


class TokenKind(Enum):
    KEYWORD = "keyword"
    RUNCOORD = "runcoord"
    LBRACE = "lbrace"
    RBRACE = "rbrace"
    DIGIT = "digit"          # single-digit numeral (symbol / value)
    COORD_PART = "coordpart" # bare two-digit numeral
    COUNT = "count"          # three-digit numeral starting with 2
    SYMBOL = "symbol"        # any other single character
    WORD = "word"            # everything else


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    index: int


def classify(text: str) -> TokenKind:
    if text in KEYWORDS:
        return TokenKind.KEYWORD
    if _RUNCOORD_RE.match(text):
        return TokenKind.RUNCOORD
    if text == "{":
        return TokenKind.LBRACE
    if text == "}":
        return TokenKind.RBRACE
    if text.isdigit():
        if len(text) == 1:
            return TokenKind.DIGIT
        if len(text) == 2:
            return TokenKind.COORD_PART
        if len(text) == 3 and text[0] == "2":
            return TokenKind.COUNT
    if len(text) == 1:
        return TokenKind.SYMBOL
    return TokenKind.WORD


def lex(text: str) -> list[Token]:
    """Split on whitespace and classify.  Lexing never fails."""
    return [Token(t, classify(t), i) for i, t in enumerate(text.split())]


@dataclass(frozen=True)
class RunCoord:
    x: int
    y: int
    count_token: int  # 200 + run count, 201..299

    def __post_init__(self):
        if not (201 <= self.count_token <= 299):
            raise ValueError(f"count token {self.count_token} outside 201..299")

    @property
    def count(self) -> int:
        return self.count_token - 200

    def text(self) -> str:
        return f"{self.x:02d},{self.y:02d}:{self.count_token}"

    @classmethod
    def parse(cls, text: str) -> RunCoord:
        m = _RUNCOORD_RE.match(text)
        if not m:
            raise ValueError(f"not a run-coordinate: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)), int(m.group(3)))


Pair = tuple[RunCoord, str]


@dataclass(frozen=True)
class Write:
    pairs: tuple[Pair, ...]


@dataclass(frozen=True)
class Look:
    pairs: tuple[Pair, ...]


@dataclass(frozen=True)
class Clear:
    pass


@dataclass(frozen=True)
class NoOp:
    text: str  # trimmed inner text, no braces


Action = Write | Look | Clear | NoOp


class DiagnosticKind(Enum):
    UNEXPECTED_TOKEN = "UnexpectedToken"
    DANGLING_PAIR = "DanglingPair"
    UNTERMINATED_BRACE = "UnterminatedBrace"


@dataclass(frozen=True)
class ParseDiagnostic:
    token_index: int
    kind: DiagnosticKind
    context: str


class MalformedAction(ValueError):
    def __init__(self, token_index: int, message: str):
        super().__init__(f"token {token_index}: {message}")
        self.token_index = token_index


def serialize_actions(actions: list[Action] | tuple[Action, ...]) -> str:
    """Canonical single-space rendering; inverse of parse_actions."""
    out: list[str] = []
    for a in actions:
        if isinstance(a, Write) or isinstance(a, Look):
            out.append("write" if isinstance(a, Write) else "look")
            for rc, sym in a.pairs:
                out.append(rc.text())
                out.append(sym)
        elif isinstance(a, Clear):
            out.append("clear")
        elif isinstance(a, NoOp):
            out.append("{")
            if a.text:
                out.append(a.text)
            out.append("}")
        else:
            raise TypeError(f"not an action: {a!r}")
    return " ".join(out)


@dataclass
class ParsedAction:
    """One parsed action plus the token span it came from."""

    action: Action
    start: int
    end: int  # exclusive
    # token index of each pair's symbol, for write/look (parallel to pairs)
    symbol_indices: tuple[int, ...] = ()


class IncrementalParser:
    """Streaming tolerant parser.

    Feed tokens as they arrive; completed actions come back as ParsedAction
    events.  An action interrupted by the end of the fed tokens stays
    pending ("trailing") so a later feed can finish it: this is how the
    forcing harness resumes a look whose symbol the generator has not
    produced yet.  Every fed token ends up in exactly one of: an action, a
    diagnostic, or the trailing buffer.

    In strict mode any deviation raises MalformedAction instead of being
    skipped, and flushing with an open action raises as well.
    """

    def __init__(self, strict: bool = False):
        self.strict = strict
        self.diagnostics: list[ParseDiagnostic] = []
        self._offset = 0  # index of the next token to be fed
        self._state = "top"  # top | pairs | noop
        # open write/look
        self._kw: str | None = None
        self._kw_start = 0
        self._pairs: list[Pair] = []
        self._symbol_indices: list[int] = []
        self._open_coord: RunCoord | None = None
        self._open_coord_index = 0
        # open no-op
        self._noop_start = 0
        self._noop_words: list[str] = []
        self._events: list[ParsedAction] = []

    # -- public -----------------------------------------------------------

    def feed(self, tokens: list[Token] | list[str]) -> list[ParsedAction]:
        for tok in tokens:
            if isinstance(tok, str):
                tok = Token(tok, classify(tok), 0)
            self._step(Token(tok.text, tok.kind, self._offset))
            self._offset += 1
        done, self._events = self._events, []
        return done

    def finish(self) -> list[ParsedAction]:
        """Close out at end of input.  Returns any final completed action.

        In tolerant mode an action cut off by the end of input stays open
        (reported via ``trailing``) so a later feed can resume it; an
        advisory diagnostic marks unterminated no-ops.
        """
        if self._state == "pairs":
            self._close_pairs(self._offset, at_eos=True)
        elif self._state == "noop":
            if self.strict:
                raise MalformedAction(self._noop_start, "unterminated no-op")
            self._diag(self._noop_start, DiagnosticKind.UNTERMINATED_BRACE, "{ " + " ".join(self._noop_words))
        done, self._events = self._events, []
        return done

    @property
    def trailing(self) -> list[str]:
        """Tokens of the currently open (incomplete) action."""
        if self._state == "pairs":
            out = [self._kw or ""]
            for rc, sym in self._pairs:
                out += [rc.text(), sym]
            if self._open_coord is not None:
                out.append(self._open_coord.text())
            return out
        if self._state == "noop":
            return ["{", *self._noop_words]
        return []

    @property
    def open_keyword(self) -> str | None:
        """"write" or "look" while such an action is still open."""
        return self._kw if self._state == "pairs" else None

    @property
    def open_look_pair(self) -> RunCoord | None:
        """The coord of a look pair still waiting for its symbol, if any."""
        if self._state == "pairs" and self._kw == "look":
            return self._open_coord
        return None

    def pending_pairs(self) -> list[Pair]:
        """Complete pairs of the open action (already executable)."""
        return list(self._pairs) if self._state == "pairs" else []

    def amend_last_pair(self, symbol: str) -> None:
        """Replace the symbol of the most recently completed open pair; the
        forcing harness uses this when it substitutes the grid's symbol."""
        if self._state != "pairs" or not self._pairs:
            raise ValueError("no open pair to amend")
        rc, _ = self._pairs[-1]
        self._pairs[-1] = (rc, symbol)

    # -- internals ---------------------------------------------------------

    def _diag(self, index: int, kind: DiagnosticKind, context: str) -> None:
        self.diagnostics.append(ParseDiagnostic(index, kind, context))

    def _reset_open(self) -> None:
        self._state = "top"
        self._kw = None
        self._pairs = []
        self._symbol_indices = []
        self._open_coord = None
        self._noop_words = []

    def _emit(self, action: Action, start: int, end: int, symbol_indices=()) -> None:
        self._events.append(ParsedAction(action, start, end, tuple(symbol_indices)))
        self._reset_open()

    def _close_pairs(self, end: int, at_eos: bool = False) -> None:
        """Close the open write/look.  Incomplete-at-EOS stays trailing."""
        if self._open_coord is not None:
            if at_eos:
                return  # leave as trailing for a future feed
            if self.strict:
                raise MalformedAction(self._open_coord_index, "run-coordinate without symbol")
            self._diag(self._open_coord_index, DiagnosticKind.DANGLING_PAIR, self._open_coord.text())
            self._open_coord = None
        if not self._pairs:
            if at_eos:
                return
            if self.strict:
                raise MalformedAction(self._kw_start, f"{self._kw} with no pairs")
            self._diag(self._kw_start, DiagnosticKind.DANGLING_PAIR, self._kw or "")
            self._reset_open()
            return
        cls = Write if self._kw == "write" else Look
        self._emit(cls(tuple(self._pairs)), self._kw_start, end, self._symbol_indices)

    def _step(self, tok: Token) -> None:
        if self._state == "noop":
            if tok.kind == TokenKind.RBRACE:
                self._emit(NoOp(" ".join(self._noop_words)), self._noop_start, tok.index + 1)
            elif tok.kind == TokenKind.LBRACE:
                if self.strict:
                    raise MalformedAction(tok.index, "nested brace in no-op")
                self._diag(tok.index, DiagnosticKind.UNEXPECTED_TOKEN, "{ inside no-op")
            else:
                self._noop_words.append(tok.text)
            return

        if self._state == "pairs":
            if self._open_coord is None:
                if tok.kind == TokenKind.RUNCOORD:
                    self._open_coord = RunCoord.parse(tok.text)
                    self._open_coord_index = tok.index
                    return
                if tok.kind in (TokenKind.KEYWORD, TokenKind.LBRACE):
                    self._close_pairs(tok.index)
                    self._step(tok)  # reprocess at top level
                    return
                if self.strict:
                    raise MalformedAction(tok.index, f"expected run-coordinate, got {tok.text!r}")
                self._diag(tok.index, DiagnosticKind.UNEXPECTED_TOKEN, tok.text)
                return
            # waiting for the pair's symbol
            if len(tok.text) == 1 and tok.kind not in (TokenKind.LBRACE, TokenKind.RBRACE):
                self._pairs.append((self._open_coord, tok.text))
                self._symbol_indices.append(tok.index)
                self._open_coord = None
                return
            if self.strict:
                raise MalformedAction(tok.index, f"expected symbol, got {tok.text!r}")
            if tok.kind == TokenKind.RUNCOORD:
                # symbol omitted; treat the new coord as the next pair
                self._diag(self._open_coord_index, DiagnosticKind.DANGLING_PAIR, self._open_coord.text())
                self._open_coord = RunCoord.parse(tok.text)
                self._open_coord_index = tok.index
                return
            if tok.kind in (TokenKind.KEYWORD, TokenKind.LBRACE):
                self._close_pairs(tok.index)
                self._step(tok)
                return
            self._diag(tok.index, DiagnosticKind.UNEXPECTED_TOKEN, tok.text)
            return

        # top level
        if tok.kind == TokenKind.KEYWORD:
            if tok.text == "clear":
                self._emit(Clear(), tok.index, tok.index + 1)
            else:
                self._state = "pairs"
                self._kw = tok.text
                self._kw_start = tok.index
            return
        if tok.kind == TokenKind.LBRACE:
            self._state = "noop"
            self._noop_start = tok.index
            return
        if self.strict:
            raise MalformedAction(tok.index, f"expected action keyword, got {tok.text!r}")
        self._diag(tok.index, DiagnosticKind.UNEXPECTED_TOKEN, tok.text)


class ParseMode(Enum):
    STRICT = "strict"
    TOLERANT = "tolerant"


@dataclass
class ParseResult:
    actions: list[Action]
    diagnostics: list[ParseDiagnostic]
    trailing: list[str] = field(default_factory=list)


def parse_actions(tokens: list[Token] | list[str] | str, mode: ParseMode = ParseMode.STRICT) -> ParseResult:
    """Parse a whole token stream.

    Strict mode raises MalformedAction on the first bad token.  Tolerant
    mode skips bad tokens (recording diagnostics) and returns an incomplete
    final action as ``trailing`` so streaming callers can resume.
    """
    if isinstance(tokens, str):
        tokens = lex(tokens)
    parser = IncrementalParser(strict=(mode is ParseMode.STRICT))
    events = parser.feed(tokens)
    events += parser.finish()
    return ParseResult([e.action for e in events], parser.diagnostics, parser.trailing)


class MismatchKind(Enum):
    SYMBOL = "symbol"
    COUNT = "count"


@dataclass(frozen=True)
class LookMismatch:
    x: int
    y: int
    kind: MismatchKind
    expected: str  # what the environment holds
    recorded: str  # what the action claimed


def check_look_pair(grid: Grid, rc: RunCoord, symbol: str) -> list[LookMismatch]:
    """Compare a look pair against the live grid."""
    out = []
    actual = grid.read(rc.x, rc.y)
    if actual != symbol:
        out.append(LookMismatch(rc.x, rc.y, MismatchKind.SYMBOL, actual, symbol))
    actual_count = grid.run_count(rc.x, rc.y) + 200
    if actual_count != rc.count_token:
        out.append(LookMismatch(rc.x, rc.y, MismatchKind.COUNT, str(actual_count), str(rc.count_token)))
    return out


def execute(action: Action, grid: Grid) -> list[LookMismatch]:
    """Apply one action to the grid.

    Writes mutate per pair (the count token is carried data, not authority);
    clear wipes the scratch columns; no-ops do nothing.  Looks mutate
    nothing and report every symbol or count disagreement with the grid.
    """
    if isinstance(action, Write):
        for rc, sym in action.pairs:
            grid.write(rc.x, rc.y, sym)
        return []
    if isinstance(action, Look):
        mismatches: list[LookMismatch] = []
        for rc, sym in action.pairs:
            mismatches.extend(check_look_pair(grid, rc, sym))
        return mismatches
    if isinstance(action, Clear):
        grid.clear_scratch()
        return []
    if isinstance(action, NoOp):
        return []
    raise TypeError(f"not an action: {action!r}")
