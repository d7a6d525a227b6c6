import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturestream.core import AnnotationSpan, GestureClass
from gesturestream.metrics import (
    greedy_match,
    jaccard_index,
    match_and_score,
    optimal_match_count,
    report_csv,
    report_json,
    span_iou,
    summary_table,
    write_report,
)

from oracles import METRIC_CASES, S, TAP, check_metric_case, greedy_equals_optimal


@pytest.mark.parametrize("case", METRIC_CASES, ids=[c[0] for c in METRIC_CASES])
def test_hand_counted_cases(case):
    assert check_metric_case(case, match_and_score) == []


def test_jaccard_examples():
    assert jaccard_index([S(TAP, 10, 19)], [S(TAP, 10, 19)], 40, TAP) == 1.0
    assert jaccard_index([S(TAP, 10, 19)], [S(TAP, 15, 24)], 40, TAP) == pytest.approx(1 / 3)
    assert jaccard_index([S(TAP, 0, 4)], [S(TAP, 10, 14)], 40, TAP) == 0.0
    assert jaccard_index([], [], 40, TAP) == 1.0


def test_strict_half_threshold():
    assert span_iou(S(TAP, 0, 9), S(TAP, 0, 4)) == 0.5
    assert greedy_match([S(TAP, 0, 9)], [S(TAP, 0, 4)]) == []


def test_unknown_sequence_rejected():
    with pytest.raises(ValueError, match="unknown sequence 'z'"):
        match_and_score([], [S(TAP, 0, 1, "z")], {"a": 10})


def test_classes_without_ground_truth_are_nan():
    report = match_and_score([S(TAP, 0, 9)], [S(TAP, 0, 9)], {"a": 20})
    assert math.isnan(report.per_class["KNOB"].det_rate)
    assert report.per_class["TAP"].jaccard == 1.0


def test_greedy_matches_brute_force_exhaustively():
    mismatches, total = greedy_equals_optimal(n_frames=3, max_spans=3)
    assert total == 12259 and mismatches == 0


def test_optimal_match_count_limit():
    with pytest.raises(ValueError):
        optimal_match_count([S(TAP, i, i) for i in range(6)], [])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 8), st.sampled_from([TAP, GestureClass.GRAB])),
                max_size=4),
       st.lists(st.tuples(st.integers(0, 30), st.integers(0, 8), st.sampled_from([TAP, GestureClass.GRAB])),
                max_size=4))
def test_greedy_is_optimal_for_disjoint_truth(gt_raw, pred_raw):
    gt, last = [], -1
    for start, length, label in sorted(gt_raw):
        if start > last:
            gt.append(S(label, start, start + length))
            last = start + length
    pred = [S(label, s, s + n) for s, n, label in pred_raw]
    assert len(greedy_match(gt, pred)) == optimal_match_count(gt, pred)


def test_perfect_detector_scores(small_dataset):
    seqs, spans = small_dataset
    report = match_and_score(spans, spans, seqs)
    assert (report.det_rate, report.fp_rate, report.jaccard) == (1.0, 0.0, 1.0)
    for m in report.per_class.values():
        assert m.gt_count == 0 or (m.jaccard, m.det_rate, m.fp_rate) == (1.0, 1.0, 0.0)


def test_empty_predictions_on_dataset(small_dataset):
    seqs, spans = small_dataset
    report = match_and_score(spans, [], seqs)
    assert (report.det_rate, report.fp_rate, report.jaccard) == (0.0, 0.0, 0.0)


def test_report_writers(tmp_path):
    report = match_and_score([S(TAP, 0, 9)], [S(TAP, 0, 5)], {"a": 20})
    report.total_seconds = 1.5
    csv_text = report_csv(report)
    assert csv_text.splitlines()[0].startswith("class,jaccard,det_rate,fp_rate")
    assert "TAP" in csv_text
    write_report({"m": report}, tmp_path / "r.csv", tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["m"]["aggregate"]["det_rate"] == 1.0
    assert data["m"]["timing"]["total_seconds"] == 1.5
    assert "Det. Rate" in summary_table({"m": report})
    json.loads(report_json({"m": report}))
