from __future__ import annotations

import random

import pytest

from longhand.grid import Grid
from longhand.questions import Problem, Template


def figure_layout() -> Grid:
    """Divisor 16, glyph, dividend 1862 on row 2."""
    g = Grid()
    for x, c in enumerate("16)1862"):
        g.write(x, 2, c)
    return g


def random_problem(rng: random.Random, max_digits: int = 8) -> Problem:
    d_len = rng.randint(1, max_digits)
    v_len = rng.randint(1, max_digits)
    dividend = rng.randint(10 ** (d_len - 1) if d_len > 1 else 0, 10**d_len - 1)
    divisor = rng.randint(10 ** (v_len - 1) if v_len > 1 else 1, 10**v_len - 1)
    return Problem(dividend, divisor, rng.choice(list(Template)))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)
