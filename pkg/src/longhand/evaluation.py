"""Scoring, first-error classification, session logs, and report rendering.

The classifier is semantic: it replays a transcript against a fresh grid
and checks each step's internal consistency (layout vs the question,
verdict no-ops vs the looked digits, arithmetic no-ops, copies vs their
source cells, the final answer vs the remainder left on the grid).  A
generator taking a valid alternative route is therefore not penalized;
only steps that contradict the question, the grid, or arithmetic count.
When several checks fire, the earliest action wins, with a fixed
precedence breaking ties at the same offset.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .actions import Action, Look, NoOp, ParseMode, Write, execute, parse_actions
from .demonstrate import Demonstration, Variant, demonstrate, final_remainder_from_noop
from .grid import Grid, RangeError, is_word_char
from .harness import Session, SessionStatus
from .questions import Problem, Template

log = logging.getLogger(__name__)

_RELATIONS = ("equal", "larger", "smaller")
_VERDICT_RE = re.compile(r"^(\S) , (\S) (equal|larger|smaller)$")
_COUNT_VERDICT_RE = re.compile(r"^(\d+) digits (equal|larger|smaller)$")
_COUNT_RE = re.compile(r"^(\d+) digits$")
_RUNCOORD_TOKEN_RE = re.compile(r"^\d\d,\d\d:2\d\d$")


class ErrorCategory(Enum):
    FINAL_TRANSCRIPTION = "final-transcription"
    INTER_AREA_COPY = "inter-area-copy"
    INITIAL_TRANSCRIPTION = "initial-transcription"
    COMPARISON = "comparison"
    SUBTRACTION = "subtraction"
    OTHER = "other"


# tie-break order at the same first offending action
_PRECEDENCE = (
    ErrorCategory.INITIAL_TRANSCRIPTION,
    ErrorCategory.COMPARISON,
    ErrorCategory.SUBTRACTION,
    ErrorCategory.INTER_AREA_COPY,
    ErrorCategory.FINAL_TRANSCRIPTION,
    ErrorCategory.OTHER,
)


class OracleUnavailable(RuntimeError):
    pass


@dataclass
class SessionRecord:
    """One evaluated question, flattened for logs and reports."""

    question: str
    dividend: int
    divisor: int
    template: str
    variant: str  # condition label: demonstration variant or generator spec
    status: str
    answer: int | None
    correct: bool
    forcing_events: int
    rounds: int
    transcript: str
    category: str = ""

    @property
    def problem(self) -> Problem:
        return Problem(self.dividend, self.divisor, Template(self.template))

    @classmethod
    def from_session(cls, session: Session, variant: str, question: str) -> SessionRecord:
        return cls(
            question=question,
            dividend=session.problem.dividend,
            divisor=session.problem.divisor,
            template=session.problem.template.value,
            variant=variant,
            status=session.status.value,
            answer=session.answer,
            correct=session.correct,
            forcing_events=len(session.forcing_events),
            rounds=session.rounds_used,
            transcript=session.transcript,
        )


def score(results: list) -> float:
    """Fraction of correct results; anything with a ``correct`` attribute
    or key works.  Empty input scores 0.0 with a warning."""
    if not results:
        log.warning("score() called with no results; reporting 0.0")
        return 0.0
    correct = 0
    for r in results:
        flag = r.correct if hasattr(r, "correct") else r["correct"]
        correct += bool(flag)
    return correct / len(results)


def _noop_arithmetic_ok(text: str) -> bool | None:
    """Check '... + ... = ...' / '... - ... = ...' no-ops.

    Returns True/False for arithmetic no-ops, None for anything else.
    Coordinate tokens are ignored and '_' reads as 0.
    """
    tokens = [t for t in text.split() if not _RUNCOORD_TOKEN_RE.match(t)]
    if "=" not in tokens:
        return None
    op = "+" if "+" in tokens else ("-" if "-" in tokens else None)
    if op is None:
        return None
    try:
        op_i = tokens.index(op)
        eq_i = tokens.index("=")
        a = tokens[:op_i]
        b = tokens[op_i + 1 : eq_i]
        c = tokens[eq_i + 1 :]
        to_int = lambda parts: int("".join("0" if p == "_" else p for p in parts))
        left, right, out = to_int(a), to_int(b), to_int(c)
    except (ValueError, IndexError):
        return None  # not an arithmetic no-op after all
    return (left + right == out) if op == "+" else (left - right == out)


def _relation(a: str, b: str) -> str:
    """How b relates to a, on single digit characters."""
    return "equal" if b == a else ("larger" if b > a else "smaller")


def _count_relation(n_b: int, n_a: int) -> str:
    return "equal" if n_b == n_a else ("larger" if n_b > n_a else "smaller")


def _divisor_on_grid(grid: Grid) -> str:
    digits = []
    x = 0
    while is_word_char(grid.read(x, 2)):
        digits.append(grid.read(x, 2))
        x += 1
    return "".join(digits)


def classify_error(record: SessionRecord, oracle_demo: Demonstration | None = None) -> ErrorCategory:
    """Assign the category of the first error in an incorrect session."""
    problem = record.problem
    if oracle_demo is None:
        try:
            oracle_demo = demonstrate(problem, Variant.FULL)
        except Exception as exc:
            raise OracleUnavailable(f"cannot derive the reference demonstration: {exc}") from exc
    expected_layout = [sym for _, sym in oracle_demo.actions[0].pairs] if isinstance(
        oracle_demo.actions[0], Write
    ) else []

    actions = parse_actions(record.transcript, ParseMode.TOLERANT).actions
    grid = Grid()
    violations: list[tuple[int, ErrorCategory]] = []

    for i, action in enumerate(actions):
        if isinstance(action, NoOp):
            self_check = _classify_noop(action.text, i, actions)
            if self_check is not None:
                violations.append(self_check)
        elif isinstance(action, Write):
            if i == 0 and expected_layout:
                written = [sym for _, sym in action.pairs]
                if not _layout_matches(written, expected_layout):
                    violations.append((0, ErrorCategory.INITIAL_TRANSCRIPTION))
            else:
                copy_issue = _check_copies(action, i, actions, grid)
                if copy_issue is not None:
                    violations.append(copy_issue)
        try:
            if not isinstance(action, Look):  # look mismatches are forced away at runtime
                execute(action, grid)
        except RangeError:
            violations.append((i, ErrorCategory.OTHER))

    final = _check_final_transcription(actions, grid)
    if final is not None:
        violations.append(final)

    if not violations:
        return ErrorCategory.OTHER  # omitted or unfinished work, nothing self-contradictory
    first = min(idx for idx, _ in violations)
    at_first = {cat for idx, cat in violations if idx == first}
    for cat in _PRECEDENCE:
        if cat in at_first:
            return cat
    return ErrorCategory.OTHER


def _layout_matches(written: list[str], expected: list[str]) -> bool:
    if len(written) != len(expected):
        return False
    for w, e in zip(written, expected):
        if is_word_char(e) or is_word_char(w):
            if w != e:
                return False
        # two non-word glyphs are interchangeable renderings of the sign
    return True


def _classify_noop(text: str, i: int, actions: list[Action]) -> tuple[int, ErrorCategory] | None:
    m = _VERDICT_RE.match(text)
    if m:
        a, b, rel = m.groups()
        if (
            i >= 2
            and isinstance(actions[i - 1], Look)
            and isinstance(actions[i - 2], Look)
            and len(actions[i - 1].pairs) == 1
            and len(actions[i - 2].pairs) == 1
        ):
            a_sym = actions[i - 2].pairs[0][1].replace("_", "0")  # blanks read as 0
            b_sym = actions[i - 1].pairs[0][1].replace("_", "0")
            if a_sym.isdigit() and b_sym.isdigit() and _relation(a_sym, b_sym) != rel:
                return (i, ErrorCategory.COMPARISON)
        return None
    m = _COUNT_VERDICT_RE.match(text)
    if m:
        n_b, rel = int(m.group(1)), m.group(2)
        for j in range(i - 1, max(-1, i - 5), -1):
            prev = actions[j]
            if isinstance(prev, NoOp):
                mc = _COUNT_RE.match(prev.text)
                if mc and _count_relation(n_b, int(mc.group(1))) != rel:
                    return (i, ErrorCategory.COMPARISON)
                break
        return None
    ok = _noop_arithmetic_ok(text)
    if ok is False:
        category = ErrorCategory.SUBTRACTION if "-" in text.split() else ErrorCategory.OTHER
        return (i, category)
    return None


def _check_copies(action: Write, i: int, actions: list[Action], grid: Grid) -> tuple[int, ErrorCategory] | None:
    """Writes that copy digits must agree with their source cells."""
    pairs = action.pairs
    symbols = [s for _, s in pairs]
    # a number copied from elsewhere right after looking at it (bring-down)
    if (
        len(pairs) == 1
        and symbols[0].isdigit()
        and i >= 1
        and isinstance(actions[i - 1], Look)
        and len(actions[i - 1].pairs) == 1
    ):
        src = actions[i - 1].pairs[0][0]
        try:
            source_sym = grid.read(src.x, src.y)
        except RangeError:
            return None
        if source_sym.isdigit() and symbols[0] != source_sym:
            return (i, ErrorCategory.INTER_AREA_COPY)
        return None
    # scratch total copied under the segment: window look, '-', then digits
    if (
        symbols
        and all(s.isdigit() for s in symbols)
        and i >= 2
        and isinstance(actions[i - 1], Write)
        and len(actions[i - 1].pairs) == 1
        and actions[i - 1].pairs[0][1] == "-"
        and isinstance(actions[i - 2], Look)
    ):
        try:
            source = [
                grid.read(rc.x, rc.y)
                for rc, _ in actions[i - 2].pairs
                if is_word_char(grid.read(rc.x, rc.y))
            ]
        except RangeError:
            return None
        if source and symbols != source:
            return (i, ErrorCategory.INTER_AREA_COPY)
        return None
    # divisor copied onto a scratch addend row (pairs following a '+')
    if "+" in symbols:
        after_plus = symbols[symbols.index("+") + 1 :]
        divisor = _divisor_on_grid(grid)
        if divisor and after_plus and all(s.isdigit() for s in after_plus):
            if "".join(after_plus) != divisor:
                return (i, ErrorCategory.INTER_AREA_COPY)
    return None


def _check_final_transcription(actions: list[Action], grid: Grid) -> tuple[int, ErrorCategory] | None:
    final_i, final_value = None, None
    read_answer_i = None
    for i, action in enumerate(actions):
        if isinstance(action, NoOp):
            value = final_remainder_from_noop(action)
            if value is not None:
                final_i, final_value = i, value
            elif action.text == "read the answer":
                read_answer_i = i
    if final_i is None or read_answer_i is None or read_answer_i > final_i:
        return None
    for j in range(read_answer_i + 1, final_i):
        if isinstance(actions[j], Look):
            digits = [
                grid.read(rc.x, rc.y)
                for rc, _ in actions[j].pairs
                if grid.read(rc.x, rc.y).isdigit()
            ]
            if digits and final_value != int("".join(digits)):
                return (final_i, ErrorCategory.FINAL_TRANSCRIPTION)
            return None
    return None


# -- session logs -----------------------------------------------------------


def save_session_records(records: list[SessionRecord], out_dir: str | Path) -> None:
    """sessions.jsonl plus one plain-text transcript per session."""
    out_dir = Path(out_dir)
    (out_dir / "transcripts").mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sessions.jsonl", "w", encoding="utf-8") as fh:
        for i, rec in enumerate(records):
            transcript_path = f"transcripts/{i:05d}.txt"
            (out_dir / transcript_path).write_text(rec.transcript + "\n", encoding="utf-8")
            row = {
                "question": rec.question,
                "dividend": rec.dividend,
                "divisor": rec.divisor,
                "template": rec.template,
                "variant": rec.variant,
                "status": rec.status,
                "answer": rec.answer,
                "correct": rec.correct,
                "forcing_events": rec.forcing_events,
                "rounds": rec.rounds,
                "category": rec.category,
                "transcript_path": transcript_path,
            }
            fh.write(json.dumps(row) + "\n")


def load_session_records(in_dir: str | Path) -> list[SessionRecord]:
    in_dir = Path(in_dir)
    records = []
    for line in (in_dir / "sessions.jsonl").read_text(encoding="utf-8").splitlines():
        row = json.loads(line)
        transcript = (in_dir / row["transcript_path"]).read_text(encoding="utf-8").rstrip("\n")
        records.append(
            SessionRecord(
                question=row["question"],
                dividend=row["dividend"],
                divisor=row["divisor"],
                template=row["template"],
                variant=row["variant"],
                status=row["status"],
                answer=row["answer"],
                correct=row["correct"],
                forcing_events=row["forcing_events"],
                rounds=row["rounds"],
                transcript=transcript,
                category=row.get("category", ""),
            )
        )
    return records


CSV_COLUMNS = (
    "question", "dividend", "divisor", "variant", "status",
    "answer", "correct", "category", "forcing_events", "rounds",
)


def write_records_csv(records: list[SessionRecord], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.question, r.dividend, r.divisor, r.variant, r.status,
                "" if r.answer is None else r.answer, int(r.correct),
                r.category, r.forcing_events, r.rounds,
            ])


# -- report rendering --------------------------------------------------------

_VARIANT_ORDER = {"answer": 0, "writeonly": 1, "writelook": 2, "full": 3}


@dataclass(frozen=True)
class ReportRow:
    variant: str
    test_set: str
    accuracy: float
    checkpoint: int | None = None


def _variant_key(name: str) -> tuple[int, str]:
    return (_VARIANT_ORDER.get(name, len(_VARIANT_ORDER)), name)


def select_checkpoint(cells: dict[int, float]) -> int:
    """Best score wins; ties go to the checkpoint with fewer iterations."""
    best = max(cells.values())
    return min(step for step, value in cells.items() if value == best)


def render_report(rows: list[ReportRow], format: str = "text") -> str:
    """Accuracy grids: variant x test-set, or variant x checkpoint when
    checkpoint sweeps are supplied (with the selected checkpoint marked)."""
    if any(r.checkpoint is not None for r in rows):
        return _render_checkpoint_grid(rows, format)
    variants = sorted({r.variant for r in rows}, key=_variant_key)
    test_sets = sorted({r.test_set for r in rows})
    cells = {(r.variant, r.test_set): r.accuracy for r in sorted(rows, key=lambda r: (r.variant, r.test_set))}
    if format == "csv":
        lines = ["variant,test_set,accuracy"]
        for v in variants:
            for t in test_sets:
                if (v, t) in cells:
                    lines.append(f"{v},{t},{cells[(v, t)]:.4f}")
        return "\n".join(lines) + "\n"
    header = ["variant"] + test_sets
    table = [header]
    for v in variants:
        table.append([v] + [
            f"{cells[(v, t)] * 100:.1f}%" if (v, t) in cells else "-" for t in test_sets
        ])
    return _align(table)


def _render_checkpoint_grid(rows: list[ReportRow], format: str) -> str:
    variants = sorted({r.variant for r in rows}, key=_variant_key)
    steps = sorted({r.checkpoint for r in rows if r.checkpoint is not None})
    grid: dict[str, dict[int, float]] = {v: {} for v in variants}
    for r in sorted(rows, key=lambda r: (r.variant, r.checkpoint or 0)):
        if r.checkpoint is not None:
            grid[r.variant][r.checkpoint] = r.accuracy
    if format == "csv":
        lines = ["variant,checkpoint,accuracy,selected"]
        for v in variants:
            chosen = select_checkpoint(grid[v]) if grid[v] else None
            for step in steps:
                if step in grid[v]:
                    lines.append(f"{v},{step},{grid[v][step]:.4f},{int(step == chosen)}")
        return "\n".join(lines) + "\n"
    header = ["variant"] + [_step_label(s) for s in steps] + ["selected"]
    table = [header]
    for v in variants:
        row = [v]
        for s in steps:
            row.append(_fmt_cell(grid[v][s]) if s in grid[v] else "-")
        row.append(_step_label(select_checkpoint(grid[v])) if grid[v] else "-")
        table.append(row)
    return _align(table)


def _step_label(step: int) -> str:
    return f"{step // 1000}K" if step % 1000 == 0 and step >= 1000 else str(step)


def _fmt_cell(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:g}"


def _align(table: list[list[str]]) -> str:
    widths = [max(len(row[c]) for row in table) for c in range(len(table[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    return "\n".join(lines) + "\n"
