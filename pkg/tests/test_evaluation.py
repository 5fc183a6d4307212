from __future__ import annotations

import logging

import pytest

from longhand.evaluation import (
    ErrorCategory,
    ReportRow,
    SessionRecord,
    classify_error,
    load_session_records,
    render_report,
    save_session_records,
    score,
    select_checkpoint,
    write_records_csv,
)
from longhand.faults import make_fault_corpus
from longhand.goldens import golden_demo
from longhand.questions import Problem


def _record(transcript: str, problem: Problem = Problem(1862, 16), answer=None) -> SessionRecord:
    return SessionRecord(
        question="q",
        dividend=problem.dividend,
        divisor=problem.divisor,
        template=problem.template.value,
        variant="test",
        status="answered" if answer is not None else "unterminated",
        answer=answer,
        correct=False,
        forcing_events=0,
        rounds=1,
        transcript=transcript,
    )


# -- score --------------------------------------------------------------------


def test_score_fraction():
    results = [type("R", (), {"correct": i < 409})() for i in range(500)]
    assert score(results) == pytest.approx(0.818)


def test_score_all_correct():
    assert score([{"correct": True}] * 7) == 1.0


def test_score_empty_warns(caplog):
    with caplog.at_level(logging.WARNING):
        assert score([]) == 0.0
    assert any("no results" in m for m in caplog.messages)


# -- classifier ---------------------------------------------------------------


def test_classify_final_transcription():
    mutated = golden_demo().replace("{ final remainder is 6 }", "{ final remainder is 7 }")
    record = _record(mutated, answer=7)
    assert classify_error(record) is ErrorCategory.FINAL_TRANSCRIPTION


def test_classify_initial_transcription():
    # first layout write puts '8' where the question has '6'
    mutated = golden_demo().replace(
        "write 00,02:201 1 01,02:202 6", "write 00,02:201 1 01,02:202 8", 1
    )
    record = _record(mutated, answer=6)
    assert classify_error(record) is ErrorCategory.INITIAL_TRANSCRIPTION


def test_classify_comparison():
    mutated = golden_demo().replace("{ 6 , 8 larger }", "{ 6 , 8 smaller }", 1)
    record = _record(mutated, answer=6)
    assert classify_error(record) is ErrorCategory.COMPARISON


def test_classify_subtraction():
    mutated = golden_demo().replace("{ 8 - 6 = 2 }", "{ 8 - 6 = 3 }", 1)
    record = _record(mutated, answer=6)
    assert classify_error(record) is ErrorCategory.SUBTRACTION


def test_classify_inter_area_copy():
    # the bring-down copies '6' from (5,2); make the write disagree
    mutated = golden_demo().replace(
        "look 05,02:203 6 write 05,04:202 6", "look 05,02:203 6 write 05,04:202 5", 1
    )
    record = _record(mutated, answer=6)
    assert classify_error(record) is ErrorCategory.INTER_AREA_COPY


def test_classify_truncation_as_other():
    tokens = golden_demo().split()
    record = _record(" ".join(tokens[: len(tokens) // 2]))
    assert classify_error(record) is ErrorCategory.OTHER


def test_classify_first_error_wins():
    mutated = golden_demo().replace("{ 6 , 8 larger }", "{ 6 , 8 smaller }", 1)
    mutated = mutated.replace("{ final remainder is 6 }", "{ final remainder is 9 }")
    record = _record(mutated, answer=9)
    assert classify_error(record) is ErrorCategory.COMPARISON


def test_classifier_fidelity_sample():
    corpus = make_fault_corpus(per_category=10, seed=123)
    agreement = sum(classify_error(c.record) == c.intended for c in corpus)
    assert agreement >= 57  # 95% of 60


def test_every_incorrect_session_gets_exactly_one_category():
    corpus = make_fault_corpus(per_category=5, seed=9)
    for case in corpus:
        assert isinstance(classify_error(case.record), ErrorCategory)


# -- session log round-trip -----------------------------------------------------


def test_session_records_roundtrip(tmp_path):
    records = [
        _record("clear { final remainder is 3 }", Problem(13, 5), answer=3),
        _record("{ final remainder is 0 }", Problem(10, 2), answer=0),
    ]
    records[0].category = "other"
    save_session_records(records, tmp_path)
    loaded = load_session_records(tmp_path)
    assert loaded == records


def test_csv_schema(tmp_path):
    path = tmp_path / "report.csv"
    write_records_csv([_record("clear", answer=1)], path)
    header = path.read_text().splitlines()[0]
    assert header == "question,dividend,divisor,variant,status,answer,correct,category,forcing_events,rounds"


# -- reports -------------------------------------------------------------------


def test_report_variant_by_test_set():
    rows = [
        ReportRow("full", "interpolated", 0.818),
        ReportRow("full", "mixed", 0.854),
        ReportRow("writelook", "interpolated", 0.602),
        ReportRow("writelook", "mixed", 0.668),
        ReportRow("writeonly", "interpolated", 0.010),
        ReportRow("writeonly", "mixed", 0.028),
        ReportRow("answer", "interpolated", 0.018),
        ReportRow("answer", "mixed", 0.026),
    ]
    text = render_report(rows)
    lines = text.splitlines()
    assert lines[0].split() == ["variant", "interpolated", "mixed"]
    assert lines[1].split() == ["answer", "1.8%", "2.6%"]
    assert lines[-1].split() == ["full", "81.8%", "85.4%"]


def test_report_stable_under_permutation():
    rows = [
        ReportRow("full", "interpolated", 0.8),
        ReportRow("answer", "interpolated", 0.1),
        ReportRow("full", "mixed", 0.9),
    ]
    assert render_report(rows) == render_report(list(reversed(rows)))


def test_checkpoint_selection_tie_goes_to_fewer_iterations():
    sweeps = {5000: 84, 6000: 71, 7000: 78, 8000: 81, 9000: 85,
              10000: 86, 11000: 80, 12000: 77, 13000: 86, 14000: 79, 15000: 84}
    assert select_checkpoint(sweeps) == 10000


def test_report_checkpoint_grid():
    rows = [
        ReportRow("full", "validation", 86, checkpoint=10000),
        ReportRow("full", "validation", 86, checkpoint=13000),
        ReportRow("full", "validation", 84, checkpoint=5000),
    ]
    text = render_report(rows)
    assert "10K" in text.splitlines()[0]
    assert text.splitlines()[1].split()[-1] == "10K"  # the selected column
    csv_text = render_report(rows, "csv")
    assert "full,10000,86.0000,1" in csv_text
    assert "full,13000,86.0000,0" in csv_text


def test_report_single_cell():
    text = render_report([ReportRow("full", "interpolated", 1.0)])
    assert text.splitlines()[1].split() == ["full", "100.0%"]
