"""Canonical data types shared by every recognizer.

Positions are millimeters, timestamps milliseconds. A "frame window" is a
plain ``(T, 20, 3)`` float array of joint positions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class JointId(enum.IntEnum):
    PALM = 0
    THUMB_A = 1
    THUMB_B = 2
    THUMB_END = 3
    INDEX_A = 4
    INDEX_B = 5
    INDEX_C = 6
    INDEX_END = 7
    MIDDLE_A = 8
    MIDDLE_B = 9
    MIDDLE_C = 10
    MIDDLE_END = 11
    RING_A = 12
    RING_B = 13
    RING_C = 14
    RING_END = 15
    PINKY_A = 16
    PINKY_B = 17
    PINKY_C = 18
    PINKY_END = 19


N_JOINTS = len(JointId)

# thumb -> pinky
FINGERTIPS = (
    JointId.THUMB_END,
    JointId.INDEX_END,
    JointId.MIDDLE_END,
    JointId.RING_END,
    JointId.PINKY_END,
)


class GestureKind(enum.Enum):
    STATIC = "static"
    COARSE_DYNAMIC = "coarse"
    FINE_DYNAMIC = "fine"
    NONE = "none"


class GestureClass(enum.IntEnum):
    """The 18 contest classes plus NON_GESTURE (always the last ordinal)."""

    ONE = 0
    TWO = 1
    THREE = 2
    FOUR = 3
    OK = 4
    MENU = 5
    POINTING = 6
    LEFT = 7
    RIGHT = 8
    CIRCLE = 9
    V = 10
    CROSS = 11
    GRAB = 12
    PINCH = 13
    TAP = 14
    DENY = 15
    KNOB = 16
    EXPAND = 17
    NON_GESTURE = 18

    @property
    def kind(self) -> GestureKind:
        return _KINDS[self]

    @property
    def is_gesture(self) -> bool:
        return self is not GestureClass.NON_GESTURE

    @classmethod
    def parse(cls, name: str) -> "GestureClass":
        key = name.strip().upper().replace("-", "_")
        if key in ("NONE", "NONGESTURE", "NO_GESTURE"):
            key = "NON_GESTURE"
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown gesture class {name!r}") from None


_KINDS = {
    **{c: GestureKind.STATIC for c in ("ONE", "TWO", "THREE", "FOUR", "OK", "MENU", "POINTING")},
    **{c: GestureKind.COARSE_DYNAMIC for c in ("LEFT", "RIGHT", "CIRCLE", "V", "CROSS")},
    **{c: GestureKind.FINE_DYNAMIC for c in ("GRAB", "PINCH", "TAP", "DENY", "KNOB", "EXPAND")},
    "NON_GESTURE": GestureKind.NONE,
}
_KINDS = {GestureClass[k]: v for k, v in _KINDS.items()}

GESTURES = tuple(c for c in GestureClass if c.is_gesture)
N_CLASSES = len(GestureClass)


@dataclass(frozen=True)
class HandFrame:
    positions: np.ndarray
    timestamp: float
    rotations: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (N_JOINTS, 3):
            raise ValueError(f"positions must be ({N_JOINTS}, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("non-finite joint coordinate")
        object.__setattr__(self, "positions", pos)
        if self.rotations is not None:
            rot = np.asarray(self.rotations, dtype=float)
            if rot.shape != (N_JOINTS, 4):
                raise ValueError(f"rotations must be ({N_JOINTS}, 4), got {rot.shape}")
            if np.any(np.abs(np.linalg.norm(rot, axis=1) - 1.0) > 1e-6):
                raise ValueError("rotation quaternions must have unit norm")
            object.__setattr__(self, "rotations", rot)


@dataclass(frozen=True, eq=False)
class SkeletonSequence:
    """One recording: ``positions`` (T, 20, 3), optional ``rotations`` (T, 20, 4)."""

    id: str
    positions: np.ndarray
    timestamps: np.ndarray
    frame_rate_hz: float
    rotations: Optional[np.ndarray] = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        ts = np.array(self.timestamps, dtype=float)
        if pos.ndim != 3 or pos.shape[1:] != (N_JOINTS, 3):
            raise ValueError(f"positions must be (T, {N_JOINTS}, 3), got {pos.shape}")
        if len(pos) < 1:
            raise ValueError("sequence must contain at least one frame")
        if ts.shape != (len(pos),):
            raise ValueError("one timestamp per frame required")
        if np.any(np.diff(ts) <= 0):
            raise ValueError(f"sequence {self.id}: timestamps must be strictly increasing")
        if not self.frame_rate_hz > 0:
            raise ValueError("frame rate must be positive")
        if not np.all(np.isfinite(pos)):
            raise ValueError(f"sequence {self.id}: non-finite joint coordinate")
        pos.flags.writeable = False
        ts.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "timestamps", ts)
        if self.rotations is not None:
            rot = np.array(self.rotations, dtype=float)
            if rot.shape != (len(pos), N_JOINTS, 4):
                raise ValueError("rotations must be (T, 20, 4)")
            rot.flags.writeable = False
            object.__setattr__(self, "rotations", rot)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def has_rotations(self) -> bool:
        return self.rotations is not None

    def frame(self, i: int) -> HandFrame:
        rot = None if self.rotations is None else self.rotations[i]
        return HandFrame(self.positions[i], float(self.timestamps[i]), rot)


@dataclass(frozen=True)
class AnnotationSpan:
    """A labeled, inclusive frame interval. Detections use the same type."""

    sequence_id: str
    label: GestureClass
    start_frame: int
    end_frame: int

    def __post_init__(self):
        if not isinstance(self.label, GestureClass):
            object.__setattr__(self, "label", GestureClass.parse(str(self.label)))
        if not self.label.is_gesture:
            raise ValueError("spans cannot carry the NON_GESTURE label")
        object.__setattr__(self, "start_frame", int(self.start_frame))
        object.__setattr__(self, "end_frame", int(self.end_frame))
        if not 0 <= self.start_frame <= self.end_frame:
            raise ValueError(f"invalid span [{self.start_frame}, {self.end_frame}]")

    @property
    def length(self) -> int:
        return self.end_frame - self.start_frame + 1

    def check_within(self, n_frames: int) -> None:
        if self.end_frame >= n_frames:
            raise ValueError(
                f"span {self.label.name} [{self.start_frame}, {self.end_frame}] exceeds "
                f"sequence {self.sequence_id} of {n_frames} frames"
            )


DetectionEvent = AnnotationSpan


def crop_window(seq: SkeletonSequence, start: int, length: int) -> np.ndarray:
    """Return positions of ``length`` consecutive frames beginning at ``start``."""
    if start < 0 or length < 1 or start + length > len(seq):
        raise IndexError(f"window [{start}, {start + length}) outside sequence of {len(seq)} frames")
    return np.array(seq.positions[start : start + length])


def resample_sequence(window: np.ndarray, target_steps: int) -> np.ndarray:
    """Linearly resample a window along its first axis to ``target_steps`` frames.

    Output frame k sits at parameter k * (T - 1) / (target_steps - 1) of the input,
    so both endpoints are kept exactly.
    """
    window = np.asarray(window, dtype=float)
    n = len(window)
    if n < 2:
        raise ValueError("resampling needs a window of at least 2 frames")
    if target_steps < 2:
        raise ValueError("target_steps must be at least 2")
    if n == target_steps:
        return window.copy()
    u = np.arange(target_steps) * (n - 1) / (target_steps - 1)
    lo = np.minimum(np.floor(u).astype(int), n - 2)
    frac = (u - lo).reshape((-1,) + (1,) * (window.ndim - 1))
    return window[lo] * (1.0 - frac) + window[lo + 1] * frac


def spans_to_labels(spans, n_frames: int) -> np.ndarray:
    """Per-frame class ordinals; frames outside every span get NON_GESTURE."""
    labels = np.full(n_frames, int(GestureClass.NON_GESTURE), dtype=int)
    for s in spans:
        s.check_within(n_frames)
        labels[s.start_frame : s.end_frame + 1] = int(s.label)
    return labels


def labels_to_spans(labels, sequence_id: str) -> list[AnnotationSpan]:
    """Maximal runs of a constant gesture label, in temporal order."""
    labels = np.asarray(labels, dtype=int)
    spans = []
    start = None
    for t, lab in enumerate(labels):
        if start is not None and lab != labels[start]:
            spans.append(AnnotationSpan(sequence_id, GestureClass(labels[start]), start, t - 1))
            start = None
        if start is None and lab != GestureClass.NON_GESTURE:
            start = t
    if start is not None:
        spans.append(AnnotationSpan(sequence_id, GestureClass(labels[start]), start, len(labels) - 1))
    return spans
