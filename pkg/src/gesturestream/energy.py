"""Motion-energy candidate segmentation around a plug-in segment classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import N_CLASSES, AnnotationSpan, GestureClass, SkeletonSequence

log = logging.getLogger(__name__)

ORIGIN_OFFSET_MM = 500.0
EPS_DIV = 1e-6
NON = int(GestureClass.NON_GESTURE)


def _guard(d):
    return np.where(np.abs(d) < EPS_DIV, np.where(d < 0, -EPS_DIV, EPS_DIV), d)


def frame_energy(positions, offset: float = ORIGIN_OFFSET_MM, kind: str = "ratio") -> np.ndarray:
    """Per-frame energy contribution e[t], summed over joints; e[0] = 0.

    ``ratio``: sqrt(sum_axis (w_t / w_{t-1} - 1)^2) on positions shifted by
    ``offset`` mm. ``displacement``: plain |w_t - w_{t-1}| (mm), for comparison.
    """
    w = np.asarray(positions, dtype=float)
    e = np.zeros(len(w))
    if len(w) < 2:
        return e
    if kind == "ratio":
        w = w + offset
        # w_t / w_{t-1} - 1 written so a constant coordinate at 0 gives exactly 0
        step = (w[1:] - w[:-1]) / _guard(w[:-1])
    elif kind == "displacement":
        step = w[1:] - w[:-1]
    else:
        raise ValueError(f"unknown energy kind {kind!r}")
    e[1:] = np.sqrt((step ** 2).sum(axis=-1)).sum(axis=-1)
    return e


def window_energy(window, offset: float = ORIGIN_OFFSET_MM, kind: str = "ratio") -> float:
    """Energy accumulated over t = 1..L-1 of one window."""
    window = np.asarray(window, dtype=float)
    if len(window) < 2:
        raise ValueError("window energy needs at least 2 frames")
    return float(frame_energy(window, offset, kind).sum())


@dataclass
class EnergyProfile:
    window_starts: np.ndarray
    window_length: int
    stride: int
    energy: np.ndarray
    delta: np.ndarray  # NaN at the first and last window

    @property
    def centers(self) -> np.ndarray:
        return self.window_starts + self.window_length // 2


def central_delta(energy) -> np.ndarray:
    """dE(w_i) = (E(w_{i+1}) - E(w_{i-1})) / 2 for interior windows."""
    energy = np.asarray(energy, dtype=float)
    d = np.full(len(energy), np.nan)
    if len(energy) >= 3:
        d[1:-1] = (energy[2:] - energy[:-2]) / 2.0
    return d


def energy_profile(positions, window_length: int = 40, stride: int = 10, offset: float = ORIGIN_OFFSET_MM,
                   kind: str = "ratio") -> EnergyProfile:
    e = frame_energy(positions, offset, kind)
    starts = np.arange(0, len(e) - window_length + 1, stride)
    csum = np.concatenate([[0.0], np.cumsum(e)])
    # frames s+1 .. s+L-1 contribute to the window starting at s
    energy = csum[starts + window_length] - csum[starts + 1]
    return EnergyProfile(starts, window_length, stride, energy, central_delta(energy))


def local_maxima(delta, epsilon: float) -> np.ndarray:
    """Indices i with dE(w_i) < epsilon, dE(w_{i-1}) > 0 and dE(w_{i+1}) < 0."""
    d = np.asarray(delta, dtype=float)
    idx = []
    for i in range(1, len(d) - 1):
        if np.isnan(d[i - 1]) or np.isnan(d[i]) or np.isnan(d[i + 1]):
            continue
        if d[i] < epsilon and d[i - 1] > 0 and d[i + 1] < 0:
            idx.append(i)
    return np.array(idx, dtype=int)


@dataclass(frozen=True)
class CandidateFilterConfig:
    epsilon: Optional[float] = None  # None: 0.05 * max|dE| of the sequence
    alpha: float = 0.5
    beta: float = 0.5
    segment_length: int = 200
    trim_fraction: float = 0.05
    floor_factor: float = 2.0  # 0 disables the median floor

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")


@dataclass
class CandidateSegment:
    """A classifier input: a fixed-length segment plus the motion burst inside it."""

    sequence: SkeletonSequence
    start: int
    end: int  # inclusive
    burst_start: int
    burst_end: int
    window_index: int

    @property
    def positions(self) -> np.ndarray:
        return self.sequence.positions[self.start : self.end + 1]

    @property
    def burst(self) -> np.ndarray:
        return self.sequence.positions[self.burst_start : self.burst_end + 1]


@dataclass
class ScoredCandidate:
    segment: CandidateSegment
    probabilities: np.ndarray
    label: GestureClass
    confidence: float


# segment -> probability vector over the 19 class ordinals
SegmentClassifier = Callable[[CandidateSegment], np.ndarray]


def segment_bounds(center: int, length: int, n_frames: int) -> tuple[int, int]:
    """A ``length``-frame segment centered on ``center``, shifted to fit inside the sequence."""
    length = min(length, n_frames)
    start = min(max(center - length // 2, 0), n_frames - length)
    return start, start + length - 1


def burst_bounds(energy, start: int, end: int, fraction: float, floor_factor: float = 2.0) -> tuple[int, int]:
    """First and last frame in [start, end] whose energy exceeds the burst threshold.

    The threshold is ``fraction`` of the segment peak, raised to
    ``floor_factor`` times the segment median so idle drift and sensor jitter
    do not stretch the burst across the whole segment.
    """
    seg = energy[start : end + 1]
    peak = seg.max() if len(seg) else 0.0
    if peak <= 0:
        return start, end
    threshold = max(fraction * peak, floor_factor * float(np.median(seg)))
    above = np.flatnonzero(seg > min(threshold, 0.999 * peak))
    return start + int(above[0]), start + int(above[-1])


def find_candidates(seq: SkeletonSequence, window_length: int = 40, stride: int = 10,
                    config: CandidateFilterConfig = CandidateFilterConfig(), kind: str = "ratio",
                    offset: float = ORIGIN_OFFSET_MM) -> tuple[EnergyProfile, list[CandidateSegment]]:
    profile = energy_profile(seq.positions, window_length, stride, offset, kind)
    eps = config.epsilon
    if eps is None:
        finite = np.abs(profile.delta[np.isfinite(profile.delta)])
        eps = 0.05 * finite.max() if len(finite) else 0.0
    e = frame_energy(seq.positions, offset, kind)
    segments = []
    for i in local_maxima(profile.delta, eps):
        start, end = segment_bounds(int(profile.centers[i]), config.segment_length, len(seq))
        b0, b1 = burst_bounds(e, start, end, config.trim_fraction, config.floor_factor)
        segments.append(CandidateSegment(seq, start, end, b0, b1, int(i)))
    return profile, segments


def score_candidates(segments, classifier: SegmentClassifier) -> list[ScoredCandidate]:
    scored = []
    for seg in segments:
        try:
            probs = np.asarray(classifier(seg), dtype=float)
        except Exception as exc:  # a failing plug-in must not kill the stream
            log.warning("classifier failed on segment [%d, %d] of %s: %s", seg.start, seg.end, seg.sequence.id, exc)
            continue
        if probs.shape != (N_CLASSES,):
            log.warning("classifier returned shape %s, expected (%d,); segment skipped", probs.shape, N_CLASSES)
            continue
        best = int(np.argmax(probs[:NON]))
        scored.append(ScoredCandidate(seg, probs, GestureClass(best), float(probs[best])))
    return scored


def filter_candidates(scored, alpha: float, beta: float) -> list[ScoredCandidate]:
    """Drop candidates with P(non-gesture) > alpha or best gesture confidence < beta."""
    return [c for c in scored if not (c.probabilities[NON] > alpha or c.confidence < beta)]


def candidates_to_events(kept, seq_id: str) -> list[AnnotationSpan]:
    """Burst-bounded events; same-class overlaps merge, cross-class overlaps keep the more confident."""
    chosen = []
    for c in sorted(kept, key=lambda c: -c.confidence):
        s, e = c.segment.burst_start, c.segment.burst_end
        clash = False
        for k in chosen:
            if s <= k[2] and k[1] <= e:
                if k[0] == c.label:
                    k[1], k[2] = min(k[1], s), max(k[2], e)
                clash = True
                break
        if not clash:
            chosen.append([c.label, s, e])
    chosen.sort(key=lambda k: k[1])
    return [AnnotationSpan(seq_id, label, s, e) for label, s, e in chosen]


def detect_candidates(seq: SkeletonSequence, window_length: int = 40, stride: int = 10,
                      config: CandidateFilterConfig = CandidateFilterConfig(),
                      classifier: Optional[SegmentClassifier] = None, refine=None,
                      kind: str = "ratio") -> list[AnnotationSpan]:
    """Energy peaks -> 200-frame segments -> classification -> alpha/beta filtering -> events.

    ``refine`` optionally maps a ``ScoredCandidate`` to a revised ``(label, confidence)``
    after filtering (used for trajectory-histogram fine-tuning).
    """
    if len(seq) < window_length + 2 * stride:
        raise ValueError(f"sequence of {len(seq)} frames is shorter than L + 2 * stride")
    _, segments = find_candidates(seq, window_length, stride, config, kind)
    if classifier is None:
        raise ValueError("detect_candidates needs a segment classifier")
    kept = filter_candidates(score_candidates(segments, classifier), config.alpha, config.beta)
    if refine is not None:
        for c in kept:
            c.label, c.confidence = refine(c)
    return candidates_to_events(kept, seq.id)
