"""Four-state online detector turning per-frame labels into gesture events.

The machine looks at a FIFO buffer of the last ``buffer_size`` frame labels
and advances one frame at a time once the buffer is full.

IDLE         any new gesture frame -> BEGIN_CHECK (tentative start = that frame)
BEGIN_CHECK  >= confirm_threshold gesture frames within confirm_windows windows -> IN_GESTURE;
             a fully empty buffer after >= short_gesture_min gesture frames -> END_CHECK;
             otherwise, once the probation runs out or the buffer empties -> IDLE
IN_GESTURE   fully empty buffer -> END_CHECK (tentative end = last gesture frame)
END_CHECK    end_confirm consecutive empty buffers -> emit, IDLE;
             a new frame of the candidate class -> IN_GESTURE;
             a new frame of another class -> emit, BEGIN_CHECK for the new gesture
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import AnnotationSpan, GestureClass

NON = int(GestureClass.NON_GESTURE)


@dataclass(frozen=True)
class FsmConfig:
    buffer_size: int = 10
    confirm_threshold: int = 5
    confirm_windows: int = 10
    end_confirm: int = 25
    short_gesture_min: int = 2
    frame_rate_hz: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.confirm_threshold <= self.confirm_windows:
            raise ValueError("confirm_threshold must be in (0, confirm_windows]")
        if self.end_confirm < 1 or self.buffer_size < 1:
            raise ValueError("end_confirm and buffer_size must be positive")

    @classmethod
    def for_duration(cls, end_seconds: float, frame_rate_hz: float, **kw) -> "FsmConfig":
        """Set ``end_confirm`` from a wall-clock duration at a given frame rate."""
        return cls(end_confirm=max(1, int(round(end_seconds * frame_rate_hz))), frame_rate_hz=frame_rate_hz, **kw)


class State(enum.Enum):
    IDLE = 1
    BEGIN_CHECK = 2
    IN_GESTURE = 3
    END_CHECK = 4


@dataclass(frozen=True)
class FsmState:
    state: State = State.IDLE
    candidate: Optional[GestureClass] = None
    start: Optional[int] = None
    last_gesture: Optional[int] = None
    votes: Counter = field(default_factory=Counter)
    first_seen: dict = field(default_factory=dict)
    positives: int = 0
    windows: int = 0
    empty_run: int = 0
    last_consumed: int = -1


def _majority(votes: Counter, first_seen: dict) -> GestureClass:
    best = max(votes.values())
    tied = [c for c, n in votes.items() if n == best]
    return GestureClass(min(tied, key=lambda c: first_seen[c]))


def _vote(s: FsmState, label: int, t: int) -> FsmState:
    votes = Counter(s.votes)
    votes[label] += 1
    first = dict(s.first_seen)
    first.setdefault(label, t)
    return replace(s, votes=votes, first_seen=first, candidate=_majority(votes, first), last_gesture=t)


def _emit(s: FsmState, seq_id: str, end: Optional[int] = None) -> AnnotationSpan:
    return AnnotationSpan(seq_id, s.candidate, s.start, s.last_gesture if end is None else end)


def _begin(window, first_index: int, t_new: int, cfg: FsmConfig, last_consumed: int) -> FsmState:
    s = FsmState(state=State.BEGIN_CHECK, windows=1, last_consumed=t_new)
    for k, lab in enumerate(window):
        t = first_index + k
        if t > last_consumed and lab != NON:
            if s.start is None:
                s = replace(s, start=t)
            s = _vote(s, int(lab), t)
            s = replace(s, positives=s.positives + 1)
    if s.positives >= cfg.confirm_threshold:
        s = replace(s, state=State.IN_GESTURE)
    return s


def fsm_step(state: FsmState, window_labels, config: FsmConfig = FsmConfig(), newest_index: Optional[int] = None,
             sequence_id: str = "") -> tuple[FsmState, Optional[AnnotationSpan]]:
    """Advance by one buffer position.

    ``window_labels`` is the full buffer (oldest first) ending at frame
    ``newest_index``. Returns the new state and an event if one was completed.
    """
    window = np.asarray(window_labels, dtype=int)
    if len(window) != config.buffer_size:
        raise ValueError(f"buffer must hold {config.buffer_size} labels, got {len(window)}")
    t = state.last_consumed + 1 if newest_index is None else int(newest_index)
    first_index = t - len(window) + 1
    newest = int(window[-1])
    empty = bool(np.all(window == NON))
    s = state

    if s.state is State.IDLE:
        if np.any((window != NON) & (np.arange(first_index, t + 1) > s.last_consumed)):
            return _begin(window, first_index, t, config, s.last_consumed), None
        return replace(s, last_consumed=t), None

    s = replace(s, last_consumed=t)

    if s.state is State.BEGIN_CHECK:
        s = replace(s, windows=s.windows + 1)
        if newest != NON:
            s = replace(_vote(s, newest, t), positives=s.positives + 1)
        if s.positives >= config.confirm_threshold:
            return replace(s, state=State.IN_GESTURE), None
        if empty:
            if s.positives >= config.short_gesture_min:
                return replace(s, state=State.END_CHECK, empty_run=1), None
            return FsmState(last_consumed=t), None
        if s.windows >= config.confirm_windows:
            return FsmState(last_consumed=t), None
        return s, None

    if s.state is State.IN_GESTURE:
        if newest != NON:
            s = _vote(s, newest, t)
        if empty:
            s = replace(s, state=State.END_CHECK, empty_run=1)
            if s.empty_run >= config.end_confirm:
                return FsmState(last_consumed=t), _emit(s, sequence_id)
        return s, None

    # END_CHECK
    if newest != NON:
        if newest == s.candidate:
            return replace(_vote(s, newest, t), state=State.IN_GESTURE, empty_run=0), None
        event = _emit(s, sequence_id)
        return _begin(window, first_index, t, config, t - 1), event
    s = replace(s, empty_run=s.empty_run + 1)
    if s.empty_run >= config.end_confirm:
        return FsmState(last_consumed=t), _emit(s, sequence_id)
    return s, None


def fsm_finish(state: FsmState, last_frame: int, sequence_id: str = "") -> Optional[AnnotationSpan]:
    """Close a gesture still open at stream end."""
    if state.state is State.IN_GESTURE:
        return _emit(state, sequence_id, end=last_frame)
    if state.state is State.END_CHECK:
        return _emit(state, sequence_id)
    return None


def fsm_run(labels, config: FsmConfig = FsmConfig(), sequence_id: str = "") -> list[AnnotationSpan]:
    labels = np.asarray(labels, dtype=int)
    events = []
    s = FsmState()
    for t in range(config.buffer_size - 1, len(labels)):
        s, event = fsm_step(s, labels[t - config.buffer_size + 1 : t + 1], config, t, sequence_id)
        if event is not None:
            events.append(event)
    if len(labels):
        last = fsm_finish(s, len(labels) - 1, sequence_id)
        if last is not None:
            events.append(last)
    return events


def trace(labels, config: FsmConfig = FsmConfig()) -> list[State]:
    """State after every buffer position, for inspection and tests."""
    labels = np.asarray(labels, dtype=int)
    s = FsmState()
    states = []
    for t in range(config.buffer_size - 1, len(labels)):
        s, _ = fsm_step(s, labels[t - config.buffer_size + 1 : t + 1], config, t)
        states.append(s.state)
    return states
