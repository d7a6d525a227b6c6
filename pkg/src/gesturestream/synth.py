"""Procedural streams of all 18 gesture classes interleaved with idle motion.

Each frame is produced by a small parametric hand: palm position, global
orientation (yaw, roll, pitch), per-finger flexion, finger spread and a
thumb-to-index pinch blend. Gesture scripts drive those parameters; idle
stretches add slow sinusoidal drift and finger wobble.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .core import GESTURES, N_JOINTS, AnnotationSpan, GestureClass, GestureKind, JointId, SkeletonSequence

HOME = np.array([0.0, 200.0, 0.0])

# index, middle, ring, pinky: knuckle x offset and phalanx lengths (mm)
_FINGER_BASE_X = np.array([-24.0, -8.0, 8.0, 24.0])
_PHALANX = np.array([[45.0, 25.0, 18.0], [50.0, 28.0, 20.0], [46.0, 26.0, 18.0], [36.0, 20.0, 16.0]])
_SPREAD_DIR = np.array([-0.25, -0.08, 0.08, 0.25])
_BEND = np.array([1.2, 1.4, 1.0])
_THUMB_BASE = np.array([-30.0, 5.0, -8.0])
_THUMB_LEN = np.array([35.0, 30.0])
_THUMB_OPEN = np.array([[-0.8, 0.6, -0.1], [-0.5, 0.85, -0.15]])
_THUMB_FLEXED = np.array([[0.3, 0.6, -0.7], [0.9, 0.1, -0.4]])

NEUTRAL_FLEX = np.array([0.15, 0.15, 0.2, 0.25, 0.3])
NEUTRAL_SPREAD = 0.3


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def hand_local(flex, spread, pinch):
    """Joint positions in the hand frame for a batch of poses, shape ``(n, 20, 3)``.

    Fingers point along +y, the palm faces -z and flexion curls toward -z.
    """
    flex = np.atleast_2d(flex)
    n = len(flex)
    spread = np.broadcast_to(np.asarray(spread, dtype=float), (n,))
    pinch = np.broadcast_to(np.asarray(pinch, dtype=float), (n,))
    out = np.zeros((n, N_JOINTS, 3))
    for f in range(4):
        s = spread * _SPREAD_DIR[f]
        p = np.stack([np.full(n, _FINGER_BASE_X[f]), np.full(n, 40.0), np.zeros(n)], axis=1)
        first = int(JointId.INDEX_A) + 4 * f
        out[:, first] = p
        phi = np.zeros(n)
        for k in range(3):
            phi = phi + flex[:, f + 1] * _BEND[k]
            d = np.stack([np.sin(s) * np.cos(phi), np.cos(s) * np.cos(phi), -np.sin(phi)], axis=1)
            p = p + _PHALANX[f, k] * d
            out[:, first + k + 1] = p
    w = flex[:, :1]
    p = np.broadcast_to(_THUMB_BASE, (n, 3)).copy()
    out[:, JointId.THUMB_A] = p
    for k, joint in enumerate((JointId.THUMB_B, JointId.THUMB_END)):
        d = _unit((1 - w) * _THUMB_OPEN[k] + w * _THUMB_FLEXED[k])
        p = p + _THUMB_LEN[k] * d
        out[:, joint] = p
    # the pinch blend pulls the thumb onto the index fingertip
    c = pinch[:, None]
    tip = out[:, JointId.INDEX_END]
    out[:, JointId.THUMB_END] = (1 - c) * out[:, JointId.THUMB_END] + c * tip
    mid = 0.5 * (out[:, JointId.THUMB_A] + tip)
    out[:, JointId.THUMB_B] = (1 - 0.5 * c) * out[:, JointId.THUMB_B] + 0.5 * c * mid
    return out


@dataclass
class HandScript:
    """Per-frame hand parameters; palm is an offset from the stream's base position."""

    palm: np.ndarray  # (n, 3)
    flex: np.ndarray  # (n, 5)
    spread: np.ndarray
    pinch: np.ndarray
    yaw: np.ndarray
    roll: np.ndarray
    pitch: np.ndarray

    @classmethod
    def neutral(cls, n: int) -> "HandScript":
        z = np.zeros(n)
        return cls(np.zeros((n, 3)), np.tile(NEUTRAL_FLEX, (n, 1)), np.full(n, NEUTRAL_SPREAD), z.copy(), z.copy(),
                   z.copy(), z.copy())

    def __len__(self):
        return len(self.flex)


def render(script: HandScript, base) -> tuple[np.ndarray, np.ndarray]:
    """Global positions ``(n, 20, 3)`` and per-joint quaternions ``(n, 20, 4)`` (w, x, y, z)."""
    local = hand_local(script.flex, script.spread, script.pinch)
    rot = Rotation.from_euler("ZYX", np.stack([script.yaw, script.roll, script.pitch], axis=1))
    mats = rot.as_matrix()
    pos = np.einsum("nij,nkj->nki", mats, local) + (np.asarray(base) + script.palm)[:, None, :]
    q = rot.as_quat()[:, [3, 0, 1, 2]]
    return pos, np.repeat(q[:, None, :], N_JOINTS, axis=1)


def _ease(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3 - 2 * u)


def _bump(n: int, peak: float = 0.45):
    """0 -> 1 -> 0 with a single maximum placed off the frame grid."""
    u = np.linspace(0.0, 1.0, n)
    return np.where(u < peak, np.sin(0.5 * np.pi * u / peak) ** 2, np.sin(0.5 * np.pi * (1 - u) / (1 - peak)) ** 2)


def _envelope(n: int, ramp: int):
    """Smooth 0 -> 1 over ``ramp`` frames, hold, then 1 -> 0."""
    t = np.arange(n)
    return np.minimum(_ease(t / ramp), _ease((n - 1 - t) / ramp))


def _blend(a, b, w):
    w = np.asarray(w, dtype=float)
    return a + (np.asarray(b) - a) * (w[:, None] if np.ndim(a) == 2 else w)


def _pose_script(n, flex, spread, pinch=0.0, yaw=0.0, roll=0.0, pitch=0.0, ramp=12):
    s = HandScript.neutral(n)
    w = _envelope(n, ramp)
    s.flex = _blend(s.flex, np.broadcast_to(flex, s.flex.shape), w)
    s.spread = _blend(s.spread, spread, w)
    s.pinch = pinch * w
    s.yaw, s.roll, s.pitch = yaw * w, roll * w, pitch * w
    return s


STATIC_POSES = {
    GestureClass.ONE: dict(flex=[1, 0, 1, 1, 1], spread=0.2),
    GestureClass.TWO: dict(flex=[1, 0, 0, 1, 1], spread=0.8),
    GestureClass.THREE: dict(flex=[1, 0, 0, 0, 1], spread=0.8),
    GestureClass.FOUR: dict(flex=[1, 0, 0, 0, 0], spread=0.8),
    GestureClass.OK: dict(flex=[0.3, 0.45, 0, 0, 0], spread=0.6, pinch=0.95),
    GestureClass.MENU: dict(flex=[0, 0, 0, 0, 0], spread=1.0, pitch=-0.6),
    GestureClass.POINTING: dict(flex=[0, 0, 1, 1, 1], spread=0.2, pitch=-0.5),
}


def _polyline(points, n):
    """Constant-speed walk along a polyline with eased start and stop."""
    points = np.asarray(points, dtype=float)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    u = np.linspace(0.0, 1.0, n)
    # ease only the first and last 15% so the middle keeps constant speed
    s = np.interp(u, [0, 0.15, 0.85, 1], [0, 0.1, 0.9, 1]) * cum[-1]
    return np.stack([np.interp(s, cum, points[:, k]) for k in range(3)], axis=1)


def palm_path(label: GestureClass, n: int) -> np.ndarray:
    if label is GestureClass.LEFT:
        return _polyline([[0, 0, 0], [-150, 0, 0]], n)
    if label is GestureClass.RIGHT:
        return _polyline([[0, 0, 0], [150, 0, 0]], n)
    if label is GestureClass.CIRCLE:
        a = np.linspace(0.0, 2 * np.pi, n)
        return np.stack([55 * np.sin(a), 55 * (np.cos(a) - 1), np.zeros(n)], axis=1)
    if label is GestureClass.V:
        return _polyline([[0, 0, 0], [70, -120, 0], [140, 0, 0]], n)
    if label is GestureClass.CROSS:
        return _polyline([[0, 0, 0], [90, -90, 0], [90, 0, 0], [0, -90, 0]], n)
    raise ValueError(f"{label.name} has no palm path")


def gesture_script(label: GestureClass, n: int) -> HandScript:
    """Parameter script of one gesture, starting and ending in the neutral pose."""
    label = GestureClass(label)
    if label in STATIC_POSES:
        return _pose_script(n, **STATIC_POSES[label])
    if label.kind is GestureKind.COARSE_DYNAMIC:
        s = HandScript.neutral(n)
        stroke = int(round(0.7 * n))
        s.palm[:stroke] = palm_path(label, stroke)
        # open paths end with a return stroke so idle stretches stay quiet
        back = _ease(np.linspace(0.0, 1.0, n - stroke + 1)[1:])
        s.palm[stroke:] = s.palm[stroke - 1] * (1 - back)[:, None]
        return s
    u = np.linspace(0.0, 1.0, n)
    if label is GestureClass.PINCH:
        s = _pose_script(n, flex=[0.15, 0.35, 0.2, 0.25, 0.3], spread=NEUTRAL_SPREAD, ramp=8)
        s.pinch = 0.9 * _bump(n)
        return s
    if label is GestureClass.GRAB:
        s = HandScript.neutral(n)
        close = np.interp(u, [0, 0.55, 0.75, 1], [0, 1, 1, 0])
        s.flex = _blend(s.flex, np.ones(5), _ease(close))
        s.spread = _blend(s.spread, 0.9, np.interp(u, [0, 0.1, 0.4, 1], [0, 1, 0, 0]))
        return s
    if label is GestureClass.EXPAND:
        s = HandScript.neutral(n)
        s.flex = _blend(s.flex, np.full(5, 0.85), _ease(np.interp(u, [0, 0.2, 0.7, 1], [0, 1, 0, 0])))
        s.flex = _blend(s.flex, np.zeros(5), _ease(np.interp(u, [0, 0.2, 0.7, 0.85, 1], [0, 0, 1, 1, 0])))
        s.spread = _blend(s.spread, 1.2, _ease(np.interp(u, [0, 0.3, 0.8, 1], [0, 0, 1, 0])))
        return s
    if label is GestureClass.TAP:
        s = _pose_script(n, flex=[1, 0.1, 1, 1, 1], spread=0.2, pitch=-0.3, ramp=10)
        taps = np.sin(np.pi * np.clip((u - 0.2) / 0.6, 0, 1) * 2) ** 2
        s.flex[:, 1] += 0.6 * taps
        return s
    if label is GestureClass.DENY:
        s = _pose_script(n, flex=[1, 0, 1, 1, 1], spread=0.2, ramp=10)
        s.yaw = 0.4 * np.sin(2 * np.pi * 2.5 * u) * _envelope(n, 8)
        return s
    if label is GestureClass.KNOB:
        s = _pose_script(n, flex=[0.5, 0.55, 0.55, 0.55, 0.55], spread=0.5, ramp=10)
        s.roll = np.interp(u, [0, 0.15, 0.5, 0.8, 1], [0, 0, 0.9, -0.3, 0])
        return s
    raise ValueError(f"unknown gesture class {label!r}")


@dataclass(frozen=True)
class SynthConfig:
    classes: tuple = tuple(GESTURES)
    gestures_per_sequence: tuple = (4,)  # drawn uniformly from these counts
    n_sequences: int = 10
    noise_mm: float = 0.05
    idle_amplitude_mm: float = 5.0
    idle_frequency_hz: tuple = (0.05, 0.3)
    idle_gap: tuple = (100, 160)
    dynamic_length: tuple = (50, 90)
    static_hold_s: float = 1.0
    frame_rate_hz: float = 50.0
    base_jitter_mm: float = 10.0
    seed: int = 0
    prefix: str = "seq"

    def __post_init__(self):
        classes = tuple(GestureClass.parse(c) if isinstance(c, str) else GestureClass(c) for c in self.classes)
        for c in classes:
            if not c.is_gesture:
                raise ValueError("NON_GESTURE cannot be generated as a gesture")
        object.__setattr__(self, "classes", classes)
        if self.n_sequences < 1 or not classes or min(self.gestures_per_sequence) < 1:
            raise ValueError("sequence, class and gesture counts must be positive")
        if self.idle_gap[0] < 1 or self.idle_gap[1] < self.idle_gap[0]:
            raise ValueError("bad idle gap range")


def gesture_length(label: GestureClass, cfg: SynthConfig, rng) -> int:
    lo, hi = cfg.dynamic_length
    if label.kind is GestureKind.STATIC:
        # form and release ramps of 12 frames each around a hold of at least static_hold_s
        lo = max(lo, int(np.ceil(cfg.static_hold_s * cfg.frame_rate_hz)) + 24)
        hi = max(hi, lo + 20)
    return int(rng.integers(lo, hi + 1))


def _idle_signal(n: int, dims: int, amplitude: float, freqs, rate: float, rng) -> np.ndarray:
    t = np.arange(n) / rate
    out = np.zeros((n, dims))
    for d in range(dims):
        for _ in range(3):
            f = rng.uniform(*freqs)
            out[:, d] += np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return amplitude * out / 3.0


def _class_schedule(cfg: SynthConfig, rng) -> list[list[GestureClass]]:
    counts = [int(rng.choice(cfg.gestures_per_sequence)) for _ in range(cfg.n_sequences)]
    total = sum(counts)
    pool = [cfg.classes[i % len(cfg.classes)] for i in range(total)]
    rng.shuffle(pool)
    out, k = [], 0
    for c in counts:
        out.append(pool[k : k + c])
        k += c
    return out


def synth_sequence(seq_id: str, labels, cfg: SynthConfig, rng) -> tuple[SkeletonSequence, list[AnnotationSpan]]:
    parts, spans, t = [], [], 0
    home = HOME + rng.normal(0.0, cfg.base_jitter_mm, 3)
    for k in range(len(labels) + 1):
        gap = int(rng.integers(cfg.idle_gap[0], cfg.idle_gap[1] + 1))
        parts.append((HandScript.neutral(gap), True))
        t += gap
        if k == len(labels):
            break
        label = labels[k]
        n = gesture_length(label, cfg, rng)
        g = gesture_script(label, n)
        parts.append((g, False))
        spans.append(AnnotationSpan(seq_id, label, t, t + n - 1))
        t += n

    script = HandScript(*(np.concatenate([getattr(p, f) for p, _ in parts]) for f in
                          ("palm", "flex", "spread", "pinch", "yaw", "roll", "pitch")))
    n_total = len(script)
    idle_mask = np.concatenate([np.full(len(p), flag, dtype=float) for p, flag in parts])
    # fade finger wobble in and out around gestures
    kernel = np.ones(11) / 11
    idle_weight = np.convolve(np.pad(idle_mask, 5, mode="edge"), kernel, mode="valid")
    idle_weight = np.minimum(idle_weight, idle_mask)
    rate = cfg.frame_rate_hz
    script.palm = script.palm + _idle_signal(n_total, 3, cfg.idle_amplitude_mm, cfg.idle_frequency_hz, rate, rng)
    script.flex = script.flex + 0.04 * idle_weight[:, None] * _idle_signal(n_total, 5, 1.0, cfg.idle_frequency_hz,
                                                                          rate, rng)
    pos, quat = render(script, home)
    if cfg.noise_mm > 0:
        pos = pos + rng.normal(0.0, cfg.noise_mm, pos.shape)
    ts = np.arange(n_total) * (1000.0 / rate)
    return SkeletonSequence(seq_id, pos, ts, rate, rotations=quat), spans


def synth_generate(config: SynthConfig = SynthConfig()) -> tuple[list[SkeletonSequence], list[AnnotationSpan]]:
    """Seeded sequences with exact annotations; class counts are balanced across the set."""
    rng = np.random.default_rng(config.seed)
    schedule = _class_schedule(config, rng)
    sequences, spans = [], []
    for i, labels in enumerate(schedule):
        seq, s = synth_sequence(f"{config.prefix}{i:03d}", labels, config, rng)
        sequences.append(seq)
        spans.extend(s)
    return sequences, spans


def synth_trajectory(label: GestureClass, n: int = 80, jitter_mm: float = 1.0, rng=None) -> np.ndarray:
    """An INDEX_END path (n, 3) of a trajectory gesture, for histogram experiments."""
    rng = np.random.default_rng(rng)
    label = GestureClass(label)
    if label.kind is GestureKind.COARSE_DYNAMIC:
        path = palm_path(label, n)
    else:
        pos, _ = render(gesture_script(label, n), HOME)
        path = pos[:, JointId.INDEX_END] - HOME
    return path + rng.normal(0.0, jitter_mm, path.shape)
