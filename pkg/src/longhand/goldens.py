"""Bundled golden transcript for the 1862/16 reference problem.

The files are a manual transcription of the worked demonstration the
training schema was designed around, with the division glyph normalized
to ')'.  They pin the byte-level contract: the demonstrator, serializer
and dataset builder must reproduce them exactly.
"""

from __future__ import annotations

from importlib import resources

from .questions import Problem, Template

GOLDEN_PROBLEM = Problem(1862, 16, Template.WHAT_IS)


def _load(name: str) -> str:
    return (
        resources.files("longhand").joinpath("data", name).read_text(encoding="utf-8").rstrip("\n")
    )


def golden_question() -> str:
    """The position-encoded question, ending with its `200 _` sentinel."""
    return _load("golden_1862_16_question.txt")


def golden_demo() -> str:
    """The serialized full-variant demonstration."""
    return _load("golden_1862_16_demo.txt")


def golden_record() -> str:
    """One complete training record: encoded question, separator, actions."""
    return golden_question() + " | " + golden_demo()
