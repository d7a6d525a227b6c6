"""Per-frame and per-window skeleton features.

All functions take frame windows as ``(T, 20, 3)`` arrays of positions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import FINGERTIPS, N_JOINTS, HandFrame, JointId

EPS = 1e-8

# thumb-index, index-middle, middle-ring, ring-pinky
ADJACENT_TIP_PAIRS = tuple(zip(FINGERTIPS[:-1], FINGERTIPS[1:]))
ARTICULATION_NAMES = tuple(
    [f"{a.name}-{b.name}" for a, b in ADJACENT_TIP_PAIRS] + [f"{t.name}-PALM" for t in FINGERTIPS]
)


def _as_window(window) -> np.ndarray:
    window = np.asarray(window, dtype=float)
    if window.ndim != 3 or window.shape[1:] != (N_JOINTS, 3):
        raise ValueError(f"expected a (T, {N_JOINTS}, 3) window, got {window.shape}")
    if len(window) == 0:
        raise ValueError("empty window")
    return window


def compute_kinematics(window) -> tuple[np.ndarray, np.ndarray]:
    """Backward-difference speed and acceleration, both ``(T, 20, 3)``.

    Speed is zero at t=0 and acceleration is zero for t<2.
    """
    window = _as_window(window)
    speed = np.zeros_like(window)
    accel = np.zeros_like(window)
    speed[1:] = window[1:] - window[:-1]
    accel[2:] = window[2:] - 2.0 * window[1:-1] + window[:-2]
    return speed, accel


def joint_distance_matrix(frame) -> np.ndarray:
    """Per-axis absolute joint-to-joint differences, shape ``(3, 20, 20)``."""
    pos = frame.positions if isinstance(frame, HandFrame) else np.asarray(frame, dtype=float)
    if pos.shape != (N_JOINTS, 3):
        raise ValueError(f"expected ({N_JOINTS}, 3) positions, got {pos.shape}")
    # sqrt((a - b)^2) == |a - b|
    return np.abs(pos.T[:, :, None] - pos.T[:, None, :])


def articulation_distances(window) -> np.ndarray:
    """The 9 articulation traces of a window, shape ``(9, T)``.

    Rows follow ``ARTICULATION_NAMES``: 4 adjacent-fingertip distances, then
    5 fingertip-to-palm distances.
    """
    window = _as_window(window)
    tips = window[:, list(FINGERTIPS)]
    adjacent = np.linalg.norm(tips[:, 1:] - tips[:, :-1], axis=2)
    to_palm = np.linalg.norm(tips - window[:, [JointId.PALM]], axis=2)
    return np.concatenate([adjacent, to_palm], axis=1).T


class NormMode(enum.Enum):
    PER_INSTANCE_ZNORM = "per_instance"
    HAND_SIZE_THEN_ZNORM = "hand_size"
    DATASET_ZSCORE = "dataset"


@dataclass(frozen=True)
class FeatureStats:
    """Training-set mean and standard deviation per feature."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, rows) -> "FeatureStats":
        rows = np.asarray(rows, dtype=float)
        rows = rows.reshape(len(rows), -1)
        return cls(rows.mean(axis=0), rows.std(axis=0))

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = x.shape
        flat = x.reshape(shape[0], -1) if x.ndim > 1 else x.reshape(1, -1)
        if flat.shape[1] != self.mean.size:
            raise ValueError(f"stats cover {self.mean.size} features, input has {flat.shape[1]}")
        out = np.where(self.std > EPS, (flat - self.mean) / np.maximum(self.std, EPS), 0.0)
        return out.reshape(shape)


def hand_size(window) -> float:
    """Mean INDEX_A to PINKY_A distance over the window."""
    window = _as_window(window)
    return float(np.mean(np.linalg.norm(window[:, JointId.INDEX_A] - window[:, JointId.PINKY_A], axis=1)))


def _znorm_axes(window: np.ndarray) -> np.ndarray:
    # pool every joint and frame per axis
    mean = window.mean(axis=(0, 1), keepdims=True)
    std = window.std(axis=(0, 1), keepdims=True)
    return np.where(std > EPS, (window - mean) / np.maximum(std, EPS), 0.0)


def normalize(window, mode: NormMode | str, stats: FeatureStats | None = None) -> np.ndarray:
    mode = NormMode(mode)
    window = np.asarray(window, dtype=float)
    if mode is NormMode.DATASET_ZSCORE:
        if stats is None:
            raise ValueError("dataset z-score normalization needs training-set statistics")
        return stats.apply(window)
    window = _as_window(window)
    if mode is NormMode.HAND_SIZE_THEN_ZNORM:
        window = scale_by_hand_size(window)
    return _znorm_axes(window)


def scale_by_hand_size(window) -> np.ndarray:
    window = _as_window(window)
    size = hand_size(window)
    return window / size if size > EPS else window.copy()


class Recipe(enum.Enum):
    POSITIONS_60 = "positions60"
    POS_SPEED_ACCEL = "pos_speed_accel"
    POS_QUAT_140 = "pos_quat140"

    @property
    def width(self) -> int:
        return {"positions60": 60, "pos_speed_accel": 180, "pos_quat140": 140}[self.value]


def frame_vector(frame: HandFrame, recipe: Recipe | str, speed=None, accel=None) -> np.ndarray:
    """Flatten one frame; joints in ordinal order, then coordinates."""
    recipe = Recipe(recipe)
    pos = frame.positions
    if recipe is Recipe.POSITIONS_60:
        return pos.ravel().copy()
    if recipe is Recipe.POS_SPEED_ACCEL:
        if speed is None or accel is None:
            raise ValueError("pos_speed_accel needs the frame's speed and acceleration")
        return np.concatenate([pos.ravel(), np.ravel(speed), np.ravel(accel)])
    if frame.rotations is None:
        raise ValueError("pos_quat140 needs per-joint quaternions")
    return np.concatenate([pos, frame.rotations], axis=1).ravel()


def sequence_vectors(positions, recipe: Recipe | str, rotations=None) -> np.ndarray:
    """``frame_vector`` applied to every frame of a window, shape ``(T, width)``."""
    recipe = Recipe(recipe)
    positions = _as_window(positions)
    T = len(positions)
    if recipe is Recipe.POSITIONS_60:
        return positions.reshape(T, -1).copy()
    if recipe is Recipe.POS_SPEED_ACCEL:
        speed, accel = compute_kinematics(positions)
        return np.concatenate([positions.reshape(T, -1), speed.reshape(T, -1), accel.reshape(T, -1)], axis=1)
    if rotations is None:
        raise ValueError("pos_quat140 needs per-joint quaternions")
    return np.concatenate([positions, np.asarray(rotations, dtype=float)], axis=2).reshape(T, -1)
