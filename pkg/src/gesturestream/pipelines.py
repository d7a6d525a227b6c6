"""End-to-end detectors sharing one contract: ``detect(seq) -> list[AnnotationSpan]``.

Each detector counts its classifier invocations so reports can carry the
mean per-classification latency next to the total wall-clock time.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .baseline import GestureDictionary, build_dictionary, events_from_margins, grid_margins, train_svms
from .core import AnnotationSpan, GestureClass, SkeletonSequence, labels_to_spans
from .energy import CandidateFilterConfig, CandidateSegment, ScoredCandidate, detect_candidates
from .fsm import FsmConfig, fsm_run
from .metrics import MetricsReport, match_and_score
from .recognizers import argmax_non_first, ensemble_probabilities
from .trajectory import TRAJECTORY_CLASSES, ClassTemplates, classify_by_histogram, trajectory_descriptor


@dataclass
class ClassificationTimer:
    seconds: float = 0.0
    count: int = 0

    def add(self, seconds: float, count: int = 1) -> None:
        self.seconds += seconds
        self.count += count

    @property
    def mean(self) -> float | None:
        return self.seconds / self.count if self.count else None


class Detector:
    name = "detector"

    def __init__(self):
        self.timer = ClassificationTimer()

    def detect(self, seq: SkeletonSequence) -> list[AnnotationSpan]:
        raise NotImplementedError


class BaselineDetector(Detector):
    """Sliding dissimilarity windows scored by per-class linear SVMs."""

    name = "baseline"

    def __init__(self, dictionary: GestureDictionary, models, stride: int = 6):
        super().__init__()
        self.dictionary, self.models, self.stride = dictionary, models, stride

    @classmethod
    def train(cls, sequences, annotations, non_gesture_count=None, boundary_negatives=None, epochs=200, lr=0.05,
              reg=1e-3, seed=0, stride=6) -> "BaselineDetector":
        """Negatives default to one random crop per gesture plus two boundary crops per gesture."""
        n = len(annotations)
        d = build_dictionary(sequences, annotations, n if non_gesture_count is None else non_gesture_count, seed,
                             boundary_negatives=2 * n if boundary_negatives is None else boundary_negatives)
        return cls(d, train_svms(d, epochs=epochs, lr=lr, reg=reg, seed=seed), stride)

    def detect(self, seq):
        t0 = time.perf_counter()
        table = grid_margins(seq, self.models, self.dictionary, self.stride)
        # one classification = one window scored by all class SVMs
        self.timer.add(time.perf_counter() - t0, max(max((len(v) for v in table.values()), default=0), 1))
        return events_from_margins(table, self.dictionary.mean_length, seq.id, self.stride)


class FrameLabelDetector(Detector):
    """Per-frame recognizer labels turned into events, either raw runs or through the FSM."""

    def __init__(self, members, fsm: FsmConfig | None = None):
        super().__init__()
        if not members:
            raise ValueError("need at least one recognizer")
        self.members = list(members)
        self.fsm = fsm
        kind = self.members[0].config.kind
        self.name = f"{kind}+fsm" if fsm is not None else f"{kind}+argmax"

    def labels(self, seq):
        t0 = time.perf_counter()
        probs = ensemble_probabilities([m.predict_proba(seq) for m in self.members])
        self.timer.add(time.perf_counter() - t0, len(seq))
        return argmax_non_first(probs)

    def detect(self, seq):
        labels = self.labels(seq)
        if self.fsm is None:
            return labels_to_spans(labels, seq.id)
        return fsm_run(labels, self.fsm, seq.id)


def build_templates(sequences, annotations, classes=TRAJECTORY_CLASSES, n_bins: int = 16) -> ClassTemplates:
    by_id = {s.id: s for s in sequences}
    segments = {c: [] for c in classes}
    for a in annotations:
        if a.label in segments:
            segments[a.label].append(by_id[a.sequence_id].positions[a.start_frame : a.end_frame + 1])
    return ClassTemplates.build({c: v for c, v in segments.items() if v}, n_bins)


class EnergyDetector(Detector):
    """Energy candidates classified by averaging recognizer probabilities over the motion burst.

    With ``templates`` the orientation histogram refines trajectory classes.
    """

    name = "energy"

    def __init__(self, members, templates: ClassTemplates | None = None, window_length: int = 40, stride: int = 10,
                 filters: CandidateFilterConfig = CandidateFilterConfig(), lam: float = 0.5, n_bins: int = 16):
        super().__init__()
        self.members, self.templates = list(members), templates
        self.window_length, self.stride = window_length, stride
        self.filters, self.lam, self.n_bins = filters, lam, n_bins

    def classify(self, seg: CandidateSegment) -> np.ndarray:
        t0 = time.perf_counter()
        probs = ensemble_probabilities([m.predict_proba(_subsequence(seg.sequence, seg.start, seg.end))
                                        for m in self.members])
        b0, b1 = seg.burst_start - seg.start, seg.burst_end - seg.start
        out = probs[b0 : b1 + 1].mean(axis=0)
        self.timer.add(time.perf_counter() - t0)
        return out

    def refine(self, cand: ScoredCandidate):
        if self.templates is None or len(cand.segment.burst) < 3:
            return cand.label, cand.confidence
        d = trajectory_descriptor(cand.segment.burst, self.n_bins)
        return classify_by_histogram(d, self.templates, (cand.label, cand.confidence), self.lam)

    def detect(self, seq):
        return detect_candidates(seq, self.window_length, self.stride, self.filters, self.classify,
                                 self.refine if self.templates is not None else None)


def _subsequence(seq: SkeletonSequence, start: int, end: int) -> SkeletonSequence:
    rot = None if seq.rotations is None else seq.rotations[start : end + 1]
    return SkeletonSequence(seq.id, seq.positions[start : end + 1], seq.timestamps[start : end + 1],
                            seq.frame_rate_hz, rot)


def run_detector(detector: Detector, sequences) -> tuple[list[AnnotationSpan], float]:
    t0 = time.perf_counter()
    events = []
    for seq in sequences:
        events.extend(detector.detect(seq))
    return events, time.perf_counter() - t0


def evaluate_detector(detector: Detector, sequences, annotations) -> tuple[MetricsReport, list[AnnotationSpan]]:
    """Run over a test set and score, filling both timing columns."""
    events, total = run_detector(detector, sequences)
    report = match_and_score(annotations, events, sequences)
    report.total_seconds = total
    report.classification_seconds = detector.timer.mean
    return report, events


@dataclass
class GridResult:
    best: dict
    best_score: float
    table: list = field(default_factory=list)  # (params, score) in evaluation order


def grid_search(make_detector, grid: dict, sequences, annotations, score: str = "jaccard") -> GridResult:
    """Exhaustive search; keys are visited in sorted order and the first maximum wins."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid search needs at least one value for every parameter")
    ids = {s.id for s in sequences}
    annotations = [a for a in annotations if a.sequence_id in ids]
    keys = sorted(grid)
    table = []
    best, best_score = None, -np.inf
    for values in itertools.product(*(grid[k] for k in keys)):
        params = dict(zip(keys, values))
        events, _ = run_detector(make_detector(**params), sequences)
        value = getattr(match_and_score(annotations, events, sequences), score)
        value = -np.inf if np.isnan(value) else float(value)
        table.append((params, value))
        if value > best_score:
            best, best_score = params, value
    return GridResult(best, best_score, table)


def energy_factory(members, templates=None):
    """``make_detector`` for grid search over alpha, beta, lam, epsilon, stride and window_length."""

    def make(alpha=0.5, beta=0.5, lam=0.5, epsilon=None, stride=10, window_length=40):
        return EnergyDetector(members, templates, window_length, stride,
                              CandidateFilterConfig(epsilon=epsilon, alpha=alpha, beta=beta), lam)

    return make


NON = int(GestureClass.NON_GESTURE)
