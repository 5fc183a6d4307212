"""The 99x99 symbol grid that demonstrations are executed against.

Cells hold single printable non-space characters; everything else is empty.
The rightmost two-fifths of the grid (columns 60-98) is erasable "scratch"
space, while the left side holds the division problem proper.
"""

from __future__ import annotations

from dataclasses import dataclass, field

GRID_SIZE = 99
SCRATCH_X0 = 60  # first column wiped by clear_scratch
EMPTY = "_"  # what an empty cell reads as; writing it erases


class RangeError(ValueError):
    """A coordinate fell outside the 99x99 grid."""


def is_word_char(ch: str) -> bool:
    """Word characters (A-Z, a-z, 0-9) are the only ones that extend runs."""
    return ch.isascii() and ch.isalnum()


def _check(x: int, y: int) -> None:
    if not (0 <= x < GRID_SIZE and 0 <= y < GRID_SIZE):
        raise RangeError(f"coordinate ({x},{y}) outside 0..{GRID_SIZE - 1}")


@dataclass
class Grid:
    """Sparse mutable grid; absent keys are empty cells.

    Single-owner state: never share one instance across threads for
    concurrent mutation.
    """

    cells: dict[tuple[int, int], str] = field(default_factory=dict)

    def write(self, x: int, y: int, symbol: str) -> None:
        """Put ``symbol`` at (x, y), overwriting; writing '_' erases."""
        _check(x, y)
        if len(symbol) != 1 or symbol.isspace():
            raise ValueError(f"symbol must be one printable non-space char, got {symbol!r}")
        if symbol == EMPTY:
            self.cells.pop((x, y), None)
        else:
            self.cells[(x, y)] = symbol

    def read(self, x: int, y: int) -> str:
        """Return the stored character, or '_' for an empty cell."""
        _check(x, y)
        return self.cells.get((x, y), EMPTY)

    def run_count(self, x: int, y: int) -> int:
        """1 + length of the contiguous word-character run just left of (x, y).

        Non-word characters (the division glyph, '+', '-') break runs exactly
        like empty cells.  The cell at (x, y) itself does not participate, so
        the count is defined for empty cells too.
        """
        _check(x, y)
        n = 1
        cx = x - 1
        while cx >= 0 and is_word_char(self.cells.get((cx, y), EMPTY)):
            n += 1
            cx -= 1
        return min(n, GRID_SIZE)

    def clear_scratch(self) -> None:
        """Erase every cell with x >= 60; columns 0-59 are untouched."""
        for key in [k for k in self.cells if k[0] >= SCRATCH_X0]:
            del self.cells[key]

    def copy(self) -> Grid:
        return Grid(dict(self.cells))

    def dump(self) -> str:
        """Debug rendering: one line per non-empty row, ``y: x=c x=c ...``."""
        lines = []
        for y in sorted({k[1] for k in self.cells}):
            row = sorted((x, c) for (x, ry), c in self.cells.items() if ry == y)
            lines.append(f"{y}: " + " ".join(f"{x}={c}" for x, c in row))
        return "\n".join(lines)


def run_count_brute_force(grid: Grid, x: int, y: int) -> int:
    """Independent leftward scan used as the oracle for Grid.run_count."""
    _check(x, y)
    n = 1
    for cx in range(x - 1, -1, -1):
        if is_word_char(grid.read(cx, y)):
            n += 1
        else:
            break
    return n
