"""Question templates and the position-labeled character encoding.

Input questions are rendered from two fixed templates and then encoded so
that every character carries an explicit within-word position token:
``201 W 202 h 203 a 204 t 200 _ ...``.  Spaces (and the end of the
question) are the sentinel pair ``200 _``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

MAX_DIGITS = 8


class Template(Enum):
    WHAT_IS = "what_is"
    CALCULATE = "calculate"


_TEMPLATES = {
    Template.WHAT_IS: "What is the remainder when {d} is divided by {v}?",
    Template.CALCULATE: "Calculate the remainder when {d} is divided by {v}.",
}

_PATTERNS = {
    Template.WHAT_IS: re.compile(r"^What is the remainder when (\d+) is divided by (\d+)\?$"),
    Template.CALCULATE: re.compile(r"^Calculate the remainder when (\d+) is divided by (\d+)\.$"),
}


class UnrecognizedTemplate(ValueError):
    pass


class MalformedEncoding(ValueError):
    pass


@dataclass(frozen=True)
class Problem:
    dividend: int
    divisor: int
    template: Template = Template.WHAT_IS

    def __post_init__(self):
        if self.dividend < 0 or not 1 <= len(str(self.dividend)) <= MAX_DIGITS:
            raise ValueError(f"dividend {self.dividend} outside 1..{MAX_DIGITS} digits")
        if self.divisor < 1 or len(str(self.divisor)) > MAX_DIGITS:
            raise ValueError(f"divisor {self.divisor} must be positive, at most {MAX_DIGITS} digits")

    @property
    def remainder(self) -> int:
        return self.dividend % self.divisor


def render_question(problem: Problem) -> str:
    return _TEMPLATES[problem.template].format(d=problem.dividend, v=problem.divisor)


def parse_question(text: str) -> Problem:
    for template, pattern in _PATTERNS.items():
        m = pattern.match(text.strip())
        if m:
            return Problem(int(m.group(1)), int(m.group(2)), template)
    raise UnrecognizedTemplate(f"not a recognized question: {text!r}")


def encode_question(text: str) -> str:
    """Label each character with 200 + its 1-indexed position in its word.

    The counter resets at every space; punctuation advances it like any
    other character.  Each space, and the end of the text, is emitted as
    the sentinel pair ``200 _``.
    """
    out: list[str] = []
    pos = 0
    for ch in text:
        if ch == " ":
            out += ["200", "_"]
            pos = 0
        else:
            pos += 1
            out += [str(200 + pos), ch]
    out += ["200", "_"]
    return " ".join(out)


def decode_question(encoded: str) -> str:
    """Inverse of encode_question; rejects gaps in position tokens."""
    tokens = encoded.split()
    if len(tokens) % 2 != 0:
        raise MalformedEncoding("odd token count")
    chars: list[str] = []
    pos = 0
    for i in range(0, len(tokens), 2):
        tag, ch = tokens[i], tokens[i + 1]
        if not (tag.isdigit() and len(tag) == 3 and tag[0] == "2"):
            raise MalformedEncoding(f"bad position token {tag!r} at token {i}")
        value = int(tag) - 200
        if value == 0:
            if ch != "_":
                raise MalformedEncoding(f"sentinel 200 must pair with '_', got {ch!r}")
            chars.append(" ")
            pos = 0
        else:
            if value != pos + 1:
                raise MalformedEncoding(f"position {value} after {pos} at token {i}")
            if len(ch) != 1:
                raise MalformedEncoding(f"multi-character symbol {ch!r}")
            chars.append(ch)
            pos = value
    if not chars or chars[-1] != " ":
        raise MalformedEncoding("missing terminal sentinel")
    return "".join(chars[:-1])
