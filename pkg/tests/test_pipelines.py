import numpy as np
import pytest

from gesturestream.core import AnnotationSpan, GestureClass
from gesturestream.energy import CandidateFilterConfig
from gesturestream.fsm import FsmConfig
from gesturestream.pipelines import (
    EnergyDetector,
    FrameLabelDetector,
    build_templates,
    energy_factory,
    evaluate_detector,
    grid_search,
    run_detector,
)
from gesturestream.trajectory import TRAJECTORY_CLASSES


@pytest.fixture(scope="module")
def detectors(tiny_recognizers, baseline_setup, small_dataset):
    seqs, spans = small_dataset
    tsgr = [tiny_recognizers["tsgr"]]
    templates = build_templates(seqs, spans)
    return {
        "baseline": baseline_setup[2],
        "argmax": FrameLabelDetector(tsgr),
        "fsm": FrameLabelDetector(tsgr, FsmConfig()),
        "gru-fsm": FrameLabelDetector([tiny_recognizers["udeepgru"]], FsmConfig()),
        "energy": EnergyDetector(tsgr, templates, filters=CandidateFilterConfig(alpha=1.0, beta=0.0)),
    }


def test_every_pipeline_shares_the_contract(detectors, small_dataset):
    seqs, spans = small_dataset
    for name, det in detectors.items():
        report, events = evaluate_detector(det, seqs[:3], [s for s in spans if s.sequence_id in {q.id for q in seqs[:3]}])
        lengths = {s.id: len(s) for s in seqs[:3]}
        for e in events:
            assert isinstance(e, AnnotationSpan) and e.label is not GestureClass.NON_GESTURE
            e.check_within(lengths[e.sequence_id])
        assert report.total_seconds > 0
        assert report.classification_seconds is not None and report.classification_seconds > 0
        assert 0.0 <= report.det_rate <= 1.0


def test_detector_names(detectors):
    assert detectors["argmax"].name == "tsgr+argmax"
    assert detectors["fsm"].name == "tsgr+fsm"
    assert detectors["gru-fsm"].name == "udeepgru+fsm"
    with pytest.raises(ValueError):
        FrameLabelDetector([])


def test_templates_cover_trajectory_classes(small_dataset):
    templates = build_templates(*small_dataset)
    assert set(templates) == set(TRAJECTORY_CLASSES)
    for h in templates.values():
        assert h.sum() == pytest.approx(1.0)


def test_run_detector_is_deterministic(detectors, small_dataset):
    seqs = small_dataset[0][:2]
    assert run_detector(detectors["fsm"], seqs)[0] == run_detector(detectors["fsm"], seqs)[0]


class _Fixed:
    """Stand-in detector that replays a fixed event list, scaled by a quality knob."""

    def __init__(self, spans, quality):
        self.spans, self.quality = spans, quality

    def detect(self, seq):
        own = [s for s in self.spans if s.sequence_id == seq.id]
        return own[: int(round(self.quality * len(own)))]


def test_grid_search_single_point_and_dominating(small_dataset):
    seqs, spans = small_dataset
    make = lambda quality: _Fixed(spans, quality)
    result = grid_search(make, {"quality": [0.5]}, seqs, spans)
    assert result.best == {"quality": 0.5} and len(result.table) == 1
    result = grid_search(make, {"quality": [0.25, 1.0, 0.5]}, seqs, spans)
    assert result.best == {"quality": 1.0} and result.best_score == 1.0
    with pytest.raises(ValueError):
        grid_search(make, {}, seqs, spans)
    with pytest.raises(ValueError):
        grid_search(make, {"quality": []}, seqs, spans)


def test_energy_grid_and_beta_monotonicity(tiny_recognizers, small_dataset):
    seqs, spans = small_dataset
    make = energy_factory([tiny_recognizers["tsgr"]])
    counts = [len(run_detector(make(alpha=1.0, beta=b), seqs[:3])[0]) for b in (0.0, 0.2, 0.5, 1.0)]
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert counts[-1] == 0
    result = grid_search(make, {"alpha": [1.0], "beta": [0.0, 1.0]}, seqs[:3], spans)
    assert [p["beta"] for p, _ in result.table] == [0.0, 1.0]
    assert result.best_score == max(v for _, v in result.table)
