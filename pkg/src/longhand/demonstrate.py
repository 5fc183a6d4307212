"""Deterministic generation of step-by-step longhand-division demonstrations.

Given a remainder question, the demonstrator lays the problem out on the
grid, finds each quotient digit by repeated addition of the divisor on the
scratch area, subtracts, brings dividend digits down, and finishes with a
``{ final remainder is N }`` no-op.  Four ablation variants project the
same underlying action stream: full (writes, looks, no-ops), write+look,
write-only, and answer-only.

Count-token sourcing quirk: the count tokens attached to *write* actions
are computed against a shadow grid that the clear action never wipes,
while *look* tokens always reflect the live grid.  Replays therefore see
byte-identical output and zero look mismatches, but a write issued right
after a clear can carry the count the cell had before the wipe.  The
bundled golden transcript depends on this behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import re

from .actions import Action, Clear, Look, LookMismatch, NoOp, RunCoord, Write, execute
from .grid import Grid
from .questions import Problem

DEFAULT_GLYPH = ")"  # the long-division sign; any non-word character works
SCRATCH_ONES_X = 72  # running totals are right-aligned here
QUOTIENT_ROW = 1
PAGE_ROW = 2

_FINAL_RE = re.compile(r"^final remainder is (\d(?: \d)*|\d+)$")


class Variant(Enum):
    FULL = "full"
    WRITE_LOOK = "writelook"
    WRITE_ONLY = "writeonly"
    ANSWER_ONLY = "answer"


class Verdict(Enum):
    A_LESS = "ALess"
    A_EQUAL = "AEqual"
    A_GREATER = "AGreater"


class EmptyOperand(ValueError):
    pass


class MissingFinalNoOp(ValueError):
    pass


@dataclass(frozen=True)
class Demonstration:
    problem: Problem
    variant: Variant
    actions: tuple[Action, ...]


@dataclass(frozen=True)
class CellRange:
    """A horizontal run of cells on one row, inclusive on both ends."""

    y: int
    x0: int
    x1: int

    def cells(self) -> list[tuple[int, int]]:
        return [(x, self.y) for x in range(self.x0, self.x1 + 1)]


def _spaced(value: int) -> str:
    """Multi-digit values inside no-ops are spelled digit by digit."""
    return " ".join(str(value))


def _value(sym: str) -> int:
    return 0 if sym == "_" else int(sym)


class _Emitter:
    """Accumulates actions while tracking the live grid and the shadow grid
    (identical except that clear never reaches it)."""

    def __init__(self, grid: Grid | None = None):
        self.grid = grid if grid is not None else Grid()
        self.shadow = self.grid.copy()
        self.actions: list[Action] = []

    def write(self, cells: list[tuple[int, int, str]]) -> Write:
        pairs = []
        for x, y, sym in cells:
            rc = RunCoord(x, y, 200 + self.shadow.run_count(x, y))
            pairs.append((rc, sym))
            self.grid.write(x, y, sym)
            self.shadow.write(x, y, sym)
        action = Write(tuple(pairs))
        self.actions.append(action)
        return action

    def look(self, cells: list[tuple[int, int]]) -> Look:
        pairs = tuple(
            (RunCoord(x, y, 200 + self.grid.run_count(x, y)), self.grid.read(x, y))
            for x, y in cells
        )
        action = Look(pairs)
        self.actions.append(action)
        return action

    def noop(self, text: str) -> NoOp:
        action = NoOp(text)
        self.actions.append(action)
        return action

    def clear(self) -> None:
        self.grid.clear_scratch()
        self.actions.append(Clear())


def _compare(
    em: _Emitter,
    a_cells: list[tuple[int, int]],
    b_cells: list[tuple[int, int]],
    *,
    a_window_from: int | None = None,
    a_boundary: tuple[int, int] | None = None,
    b_trailing: bool = False,
) -> str:
    """Emit the comparison pattern and return how B relates to A.

    A is looked at first: either its digit cells plus one boundary cell
    (the cell that terminates the number), or, for scratch totals, a fixed
    window from the '+' column through one past the ones column.  Digit
    counts are announced, then digits are compared left to right until the
    first inequality.  Returns "equal", "larger" or "smaller" (B vs A).
    """
    em.noop("compare")
    if a_window_from is not None:
        em.look([(x, a_cells[0][1]) for x in range(a_window_from, SCRATCH_ONES_X + 2)])
    elif a_boundary is not None:
        em.look(a_cells + [a_boundary])
    else:
        em.look(a_cells)
    em.noop(f"{len(a_cells)} digits")
    b_look = b_cells + [(b_cells[-1][0] + 1, b_cells[-1][1])] if b_trailing else b_cells
    em.look(b_look)
    n_a, n_b = len(a_cells), len(b_cells)
    rel = "equal" if n_b == n_a else ("larger" if n_b > n_a else "smaller")
    em.noop(f"{n_b} digits {rel}")
    if rel != "equal":
        return rel
    for (ax, ay), (bx, by) in zip(a_cells, b_cells):
        a_sym = em.grid.read(ax, ay)
        b_sym = em.grid.read(bx, by)
        em.look([(ax, ay)])
        em.look([(bx, by)])
        digit_rel = "equal" if b_sym == a_sym else ("larger" if b_sym > a_sym else "smaller")
        em.noop(f"{a_sym} , {b_sym} {digit_rel}")
        if digit_rel != "equal":
            return digit_rel
    return "equal"


class _Demonstrator:
    def __init__(self, problem: Problem, glyph: str = DEFAULT_GLYPH):
        self.problem = problem
        self.glyph = glyph
        self.dividend = str(problem.dividend)
        self.divisor = str(problem.divisor)
        self.n = len(self.divisor)
        self.dx0 = self.n + 1  # first dividend column; glyph sits at x = n
        self.x_plus = SCRATCH_ONES_X - self.n  # '+' column on scratch
        self.em = _Emitter()
        self.consumed = 0  # dividend digits used so far

    # -- building blocks ----------------------------------------------------

    def _layout(self) -> None:
        cells = [(i, PAGE_ROW, self.divisor[i]) for i in range(self.n)]
        cells.append((self.n, PAGE_ROW, self.glyph))
        cells += [(self.dx0 + j, PAGE_ROW, self.dividend[j]) for j in range(len(self.dividend))]
        self.em.write(cells)

    def _divisor_cells(self) -> list[tuple[int, int]]:
        return [(i, PAGE_ROW) for i in range(self.n)]

    def _scratch_setup(self) -> None:
        self.em.look(self._divisor_cells())
        cells = [(x, 0, "_") for x in range(self.x_plus + 1, SCRATCH_ONES_X)]
        cells.append((SCRATCH_ONES_X, 0, "0"))
        cells.append((self.x_plus, 1, "+"))
        cells += [
            (self.x_plus + 1 + i, 1, self.divisor[i]) for i in range(self.n)
        ]
        self.em.write(cells)

    def _addend_cells(self, row: int) -> list[tuple[int, int, str]]:
        return [(self.x_plus, row, "+")] + [
            (self.x_plus + 1 + i, row, self.divisor[i]) for i in range(self.n)
        ]

    def _add_rows(self, trow: int) -> None:
        """Column-wise addition of total row ``trow`` and the addend row
        below it, writing the new total two rows down."""
        em = self.em
        carry = 0
        for x in range(SCRATCH_ONES_X, self.x_plus, -1):
            t_sym = em.grid.read(x, trow)
            a_sym = em.grid.read(x, trow + 1)
            look = em.look([(x, trow), (x, trow + 1)])
            base = _value(t_sym) + _value(a_sym)
            em.noop(
                f"{look.pairs[0][0].text()} {t_sym} + {look.pairs[1][0].text()} {a_sym}"
                f" = {_spaced(base)}"
            )
            digit_total = base + carry
            if carry:
                em.noop(f"{_spaced(base)} + 1 = {_spaced(digit_total)}")
            em.write([(x, trow + 2, str(digit_total % 10))])
            carry = 1 if digit_total >= 10 else 0
            if carry:
                em.noop("carry the 1")
        # the '+' column: a leading total digit may live here
        t_sym = em.grid.read(self.x_plus, trow)
        em.look([(self.x_plus, trow), (self.x_plus, trow + 1)])
        lead = _value(t_sym)
        em.noop(f"{lead} + 0 = {lead}")
        if carry:
            em.noop(f"{lead} + 1 = {lead + carry}")
        if lead + carry >= 1:
            em.write([(self.x_plus, trow + 2, str(lead + carry))])

    def _search(self, seg: CellRange) -> tuple[int | None, int]:
        """Find the quotient digit for ``seg`` by repeated addition.

        Returns (row of the last not-exceeding total, digit), or (None, 0)
        when the first total already exceeds the segment.
        """
        em = self.em
        q_x = seg.x1
        self._scratch_setup()
        total, trow, q = 0, 0, 0
        while True:
            self._add_rows(trow)
            trow += 2
            total += self.problem.divisor
            t_str = str(total)
            a_cells = [(x, trow) for x in range(SCRATCH_ONES_X - len(t_str) + 1, SCRATCH_ONES_X + 1)]
            rel = _compare(
                em, a_cells, seg.cells(),
                a_window_from=self.x_plus,
                b_trailing=(seg.y > PAGE_ROW),
            )
            if rel == "smaller":  # total finally exceeds the segment
                return (trow - 2, q) if q > 0 else (None, 0)
            q += 1
            look = em.look([(q_x, QUOTIENT_ROW)])
            em.noop(f"{look.pairs[0][0].text()} {q - 1} + 1 = {q}")
            em.write([(q_x, QUOTIENT_ROW, str(q))] + self._addend_cells(trow + 1))

    def _subtract(self, seg: CellRange, sub_row: int, total_value: int) -> int:
        """Copy the chosen total under the segment and subtract column-wise.
        Returns the difference row."""
        em = self.em
        em.look([(x, sub_row) for x in range(self.x_plus, SCRATCH_ONES_X + 2)])
        srow, drow = seg.y + 1, seg.y + 2
        em.write([(seg.x0 - 1, srow, "-")])
        t_str = str(total_value)
        em.write([
            (seg.x1 - len(t_str) + 1 + i, srow, t_str[i]) for i in range(len(t_str))
        ])
        for x in range(seg.x1, seg.x0 - 1, -1):
            m_sym = em.grid.read(x, seg.y)
            s_sym = em.grid.read(x, srow)
            em.look([(x, seg.y)])
            em.look([(x, srow)])
            m, s = int(m_sym), _value(s_sym)
            s_shown = "0" if s_sym == "_" else s_sym
            rel = "equal" if s == m else ("larger" if s > m else "smaller")
            em.noop(f"{m_sym} , {s_shown} {rel}")
            if s > m:
                em.noop("borrow a 1")
                j = x - 1
                while em.grid.read(j, seg.y) == "0":
                    em.look([(j, seg.y)])
                    em.noop("change 0 to 9")
                    em.write([(j, seg.y, "9")])
                    j -= 1
                d = int(em.grid.read(j, seg.y))
                em.look([(j, seg.y)])
                em.noop(f"{d} - 1 = {d - 1}")
                em.write([(j, seg.y, str(d - 1))])
                em.noop(f"1 {m_sym} - {s_shown} = {10 + m - s}")
                diff = 10 + m - s
            else:
                em.noop(f"{m_sym} - {s_shown} = {m - s}")
                diff = m - s
            em.write([(x, drow, str(diff))])
        return drow

    def _trim_leading_zeros(self, x0: int, x1: int, row: int) -> int:
        """Erase leading zeros (never the ones digit); ends with a look at
        the first surviving digit.  Returns its column."""
        em = self.em
        rx = x0
        while rx < x1 and em.grid.read(rx, row) == "0":
            em.look([(rx, row)])
            em.write([(rx, row, "_")])
            rx += 1
        em.look([(rx, row)])
        return rx

    def _read_answer(self, rx0: int, x1: int, row: int) -> CellRange | None:
        """Scan the remainder, peek at the next dividend digit, and either
        bring it down (returning the new segment) or finish."""
        em = self.em
        em.noop("read the answer")
        em.look([(x, row) for x in range(rx0, x1 + 2)])
        next_x = self.dx0 + self.consumed
        em.look([(next_x, PAGE_ROW)])
        if self.consumed < len(self.dividend):
            em.write([(x1 + 1, row, self.dividend[self.consumed])])
            self.consumed += 1
            if rx0 == x1 and em.grid.read(rx0, row) == "0":
                # a bare zero remainder would become a leading zero
                em.look([(rx0, row)])
                em.write([(rx0, row, "_")])
                rx0 = x1 + 1
            return CellRange(row, rx0, x1 + 1)
        digits = "".join(em.grid.read(x, row) for x in range(rx0, x1 + 1))
        em.noop(f"final remainder is {int(digits)}")
        return None

    # -- top level -----------------------------------------------------------

    def run(self) -> list[Action]:
        em = self.em
        len_d = len(self.dividend)
        self._layout()
        k = min(self.n, len_d)
        b_cells = [(self.dx0 + j, PAGE_ROW) for j in range(k)]
        rel = _compare(
            em, self._divisor_cells(), b_cells, a_boundary=(self.n, PAGE_ROW)
        )
        if rel == "smaller":  # leading digits smaller than the divisor
            if len_d <= self.n:  # the whole dividend is: answer immediately
                em.write([(self.dx0 + len_d - 1, QUOTIENT_ROW, "0")])
                em.noop(f"final remainder is {self.problem.dividend}")
                return em.actions
            seg = CellRange(PAGE_ROW, self.dx0, self.dx0 + self.n)
        else:
            seg = CellRange(PAGE_ROW, self.dx0, self.dx0 + self.n - 1)
        self.consumed = seg.x1 - self.dx0 + 1
        while True:
            em.write([(seg.x1, QUOTIENT_ROW, "0")])
            em.clear()
            sub_row, q = self._search(seg)
            if sub_row is None:  # quotient digit 0: keep the segment as is
                rem_row = seg.y
                rx0 = self._trim_leading_zeros(seg.x0, seg.x1, rem_row)
            else:
                rem_row = self._subtract(seg, sub_row, q * self.problem.divisor)
                rx0 = self._trim_leading_zeros(seg.x0, seg.x1, rem_row)
            nxt = self._read_answer(rx0, seg.x1, rem_row)
            if nxt is None:
                return em.actions
            seg = nxt


def _project(actions: list[Action], variant: Variant) -> tuple[Action, ...]:
    if variant is Variant.FULL:
        return tuple(actions)
    if variant is Variant.ANSWER_ONLY:
        return (actions[-1],)
    kept = [a for a in actions[:-1] if not isinstance(a, NoOp)]
    if variant is Variant.WRITE_ONLY:
        kept = [a for a in kept if not isinstance(a, Look)]
    return tuple(kept + [actions[-1]])


def demonstrate(problem: Problem, variant: Variant = Variant.FULL, glyph: str = DEFAULT_GLYPH) -> Demonstration:
    """Generate the complete demonstration for ``problem``.

    Identical inputs produce byte-identical serializations; every variant
    ends with the final-remainder no-op.
    """
    full = _Demonstrator(problem, glyph).run()
    return Demonstration(problem, variant, _project(full, variant))


def final_remainder_from_noop(noop: NoOp) -> int | None:
    m = _FINAL_RE.match(noop.text)
    return int("".join(m.group(1).split())) if m else None


@dataclass
class VerifyReport:
    look_mismatches: list[LookMismatch]
    final_answer: int
    answer_correct: bool
    final_grid: Grid


def verify_demonstration(demo: Demonstration) -> VerifyReport:
    """Replay a demonstration from an empty grid and check it against both
    the environment (look mismatches) and integer arithmetic."""
    grid = Grid()
    mismatches: list[LookMismatch] = []
    for action in demo.actions:
        mismatches.extend(execute(action, grid))
    answer = None
    for action in demo.actions:
        if isinstance(action, NoOp):
            value = final_remainder_from_noop(action)
            if value is not None:
                answer = value
    if answer is None:
        raise MissingFinalNoOp("demonstration has no final-remainder no-op")
    return VerifyReport(
        look_mismatches=mismatches,
        final_answer=answer,
        answer_correct=(answer == demo.problem.remainder),
        final_grid=grid,
    )


def compare_sequence(
    grid: Grid,
    a: CellRange,
    b: CellRange,
    variant: Variant = Variant.FULL,
    *,
    b_trailing: bool = False,
) -> tuple[tuple[Action, ...], Verdict]:
    """Emit the number-comparison look/no-op pattern for two cell ranges.

    Both ranges must hold decimal numbers.  The verdict matches integer
    comparison; the emitted actions follow the same shape the demonstrator
    uses, with A scanned through one boundary cell past its digits.
    """
    for rng in (a, b):
        if not any(grid.read(x, rng.y).isdigit() for x in range(rng.x0, rng.x1 + 1)):
            raise EmptyOperand(f"no digits in {rng}")
    em = _Emitter(grid.copy())
    rel = _compare(em, a.cells(), b.cells(), a_boundary=(a.x1 + 1, a.y), b_trailing=b_trailing)
    verdict = {"larger": Verdict.A_LESS, "smaller": Verdict.A_GREATER, "equal": Verdict.A_EQUAL}[rel]
    actions = list(em.actions)
    if variant is not Variant.FULL:
        if variant is Variant.ANSWER_ONLY:
            actions = []
        else:
            actions = [x for x in actions if not isinstance(x, NoOp)]
            if variant is Variant.WRITE_ONLY:
                actions = [x for x in actions if not isinstance(x, Look)]
    return tuple(actions), verdict
