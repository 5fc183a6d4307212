from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longhand.actions import (
    Clear,
    Look,
    MalformedAction,
    NoOp,
    ParseMode,
    RunCoord,
    TokenKind,
    Write,
    execute,
    lex,
    parse_actions,
    serialize_actions,
)
from longhand.goldens import golden_demo
from longhand.grid import Grid
from conftest import figure_layout

# -- lexing -------------------------------------------------------------------


def test_lex_write_line():
    kinds = [t.kind for t in lex("write 04,01:201 0 clear")]
    assert kinds == [TokenKind.KEYWORD, TokenKind.RUNCOORD, TokenKind.DIGIT, TokenKind.KEYWORD]


def test_lex_empty():
    assert lex("") == []


def test_lex_noop_tokens():
    toks = lex("{ carry the 1 }")
    assert [t.kind for t in toks] == [
        TokenKind.LBRACE, TokenKind.WORD, TokenKind.WORD, TokenKind.DIGIT, TokenKind.RBRACE,
    ]


def test_lex_numeral_classes():
    assert lex("7")[0].kind is TokenKind.DIGIT
    assert lex("42")[0].kind is TokenKind.COORD_PART
    assert lex("203")[0].kind is TokenKind.COUNT
    assert lex("103")[0].kind is TokenKind.WORD  # three digits not starting with 2


# -- parsing ------------------------------------------------------------------


def test_parse_multi_pair_look():
    result = parse_actions("look 00,02:201 1 01,02:202 6", ParseMode.STRICT)
    assert result.actions == [
        Look(((RunCoord(0, 2, 201), "1"), (RunCoord(1, 2, 202), "6"))),
    ]


def test_parse_unpadded_coordinate_is_malformed():
    with pytest.raises(MalformedAction):
        parse_actions("write 4,1 0", ParseMode.STRICT)


def test_parse_golden_strict():
    result = parse_actions(golden_demo(), ParseMode.STRICT)
    assert result.diagnostics == []
    assert result.trailing == []
    assert isinstance(result.actions[0], Write)
    assert isinstance(result.actions[-1], NoOp)


def test_tolerant_skips_and_reports():
    result = parse_actions("write 4,1 0 write 04,01:201 0", ParseMode.TOLERANT)
    assert result.actions == [Write(((RunCoord(4, 1, 201), "0"),))]
    assert result.diagnostics  # the bad tokens were recorded, not dropped silently


def test_tolerant_trailing_partial_pair():
    result = parse_actions("look 04,01:201", ParseMode.TOLERANT)
    assert result.actions == []
    assert result.trailing == ["look", "04,01:201"]


def test_tolerant_unterminated_noop_stays_trailing():
    result = parse_actions("{ carry the", ParseMode.TOLERANT)
    assert result.actions == []
    assert result.trailing == ["{", "carry", "the"]
    assert any(d.kind.value == "UnterminatedBrace" for d in result.diagnostics)


def test_nested_brace_rejected():
    with pytest.raises(MalformedAction):
        parse_actions("{ a { b } }", ParseMode.STRICT)


# -- serialization ------------------------------------------------------------


def test_serialize_clear():
    assert serialize_actions([Clear()]) == "clear"


def test_serialize_noop():
    assert serialize_actions([NoOp("final remainder is 6")]) == "{ final remainder is 6 }"


def test_serialize_write_then_clear():
    actions = [Write(((RunCoord(4, 1, 201), "0"),)), Clear()]
    assert serialize_actions(actions) == "write 04,01:201 0 clear"


def test_golden_byte_exactness():
    text = golden_demo()
    assert serialize_actions(parse_actions(text, ParseMode.STRICT).actions) == text


_symbols = st.sampled_from("0123456789_+-)xZ")
_runcoords = st.builds(
    RunCoord, st.integers(0, 98), st.integers(0, 98), st.integers(201, 299)
)
_pairs = st.lists(st.tuples(_runcoords, _symbols), min_size=1, max_size=4).map(tuple)
_noop_word = st.text(
    alphabet="abcdefghijklmnopqrstuvwxyz0123456789,+-=", min_size=1, max_size=9
).filter(lambda w: w not in ("write", "look", "clear"))
_actions = st.one_of(
    st.builds(Write, _pairs),
    st.builds(Look, _pairs),
    st.just(Clear()),
    st.builds(lambda ws: NoOp(" ".join(ws)), st.lists(_noop_word, max_size=5)),
)


@given(st.lists(_actions, max_size=12))
@settings(max_examples=200, deadline=None)
def test_roundtrip_random_action_lists(actions):
    text = serialize_actions(actions)
    result = parse_actions(text, ParseMode.STRICT)
    assert result.actions == actions
    assert serialize_actions(result.actions) == text


@given(st.text(alphabet=" {}019azwritelook,:+_", max_size=80))
@settings(max_examples=300, deadline=None)
def test_tolerant_parsing_is_total(text):
    """Every token lands in exactly one of: an action, a skipped-token
    diagnostic, or the trailing buffer."""
    tokens = text.split()
    result = parse_actions(text, ParseMode.TOLERANT)
    in_actions = sum(
        1 + 2 * len(a.pairs) if isinstance(a, (Write, Look)) else
        1 if isinstance(a, Clear) else
        2 + len(a.text.split())
        for a in result.actions
    )
    skipped = sum(1 for d in result.diagnostics if d.kind.value != "UnterminatedBrace")
    assert in_actions + skipped + len(result.trailing) == len(tokens)


# -- execution ----------------------------------------------------------------


def test_execute_look_matches():
    g = figure_layout()
    look = Look(((RunCoord(0, 2, 201), "1"),))
    assert execute(look, g) == []


def test_execute_look_symbol_mismatch():
    g = figure_layout()
    look = Look(((RunCoord(0, 2, 201), "8"),))
    mismatches = execute(look, g)
    assert len(mismatches) == 1
    assert (mismatches[0].expected, mismatches[0].recorded) == ("1", "8")


def test_execute_noop_no_effect():
    g = figure_layout()
    before = dict(g.cells)
    assert execute(NoOp("compare"), g) == []
    assert g.cells == before


def test_execute_count_mismatch_reported():
    g = figure_layout()
    look = Look(((RunCoord(2, 2, 201), ")"),))  # true count is 203
    mismatches = execute(look, g)
    assert len(mismatches) == 1
    assert mismatches[0].kind.value == "count"


def test_multi_pair_write_equals_single_pair_writes():
    pairs = ((RunCoord(10, 5, 201), "7"), (RunCoord(11, 5, 202), "3"), (RunCoord(10, 5, 201), "_"))
    g1, g2 = Grid(), Grid()
    execute(Write(pairs), g1)
    for pair in pairs:
        execute(Write((pair,)), g2)
    assert g1.cells == g2.cells
