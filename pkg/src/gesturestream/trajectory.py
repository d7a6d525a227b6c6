"""Orientation histograms of the index fingertip path, matched to class templates."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .core import GestureClass, JointId

TRAJECTORY_CLASSES = (GestureClass.CIRCLE, GestureClass.V, GestureClass.CROSS, GestureClass.DENY)
DEFAULT_BINS = 16


def pca_axes(points) -> tuple[np.ndarray, np.ndarray]:
    """Principal axes of centered 3D points, columns sorted by decreasing variance.

    Equal eigenvalues keep the original axis order; each axis is signed so
    its first non-negligible component is positive.
    """
    points = np.asarray(points, dtype=float)
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / max(len(points) - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    # dominant coordinate of each eigenvector breaks ties by original axis index
    dominant = np.argmax(np.abs(evecs), axis=0)
    scale = max(float(np.abs(evals).max()), 1e-300)
    order = sorted(range(3), key=lambda k: (-round(evals[k] / scale, 12), dominant[k]))
    evals, evecs = evals[order], evecs[:, order]
    for k in range(3):
        nz = np.flatnonzero(np.abs(evecs[:, k]) > 1e-12)
        if len(nz) and evecs[nz[0], k] < 0:
            evecs[:, k] = -evecs[:, k]
    return evals, evecs


def project_2d(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    _, axes = pca_axes(points)
    return (points - points.mean(axis=0)) @ axes[:, :2]


def orientation_angles(path_2d, min_step_fraction: float = 1e-6) -> np.ndarray:
    """Step orientations folded into [-pi/2, pi/2]; near-zero steps dropped."""
    steps = np.diff(np.asarray(path_2d, dtype=float), axis=0)
    norms = np.linalg.norm(steps, axis=1)
    total = norms.sum()
    keep = norms >= min_step_fraction * total if total > 0 else np.zeros(len(norms), dtype=bool)
    dx, dy = steps[keep, 0], steps[keep, 1]
    theta = np.arctan2(dy, dx)
    # atan(dy/dx) drops the direction sign
    theta = np.where(theta > np.pi / 2, theta - np.pi, theta)
    theta = np.where(theta < -np.pi / 2, theta + np.pi, theta)
    return theta


def angle_bins(theta, n_bins: int) -> np.ndarray:
    """Bin index of each angle over [-pi/2, pi/2]; both ends of the range go to the last bin."""
    u = (np.asarray(theta, dtype=float) + np.pi / 2) / (np.pi / n_bins)
    # snap values within rounding noise of a bin edge onto the edge
    r = np.round(u)
    u = np.where(np.abs(u - r) < 1e-9, r, u)
    idx = np.floor(u).astype(int)
    idx = np.where((idx <= 0) & (u <= 0), n_bins - 1, idx)
    return np.clip(idx, 0, n_bins - 1)


def index_tip_path(segment) -> np.ndarray:
    segment = np.asarray(segment, dtype=float)
    if segment.ndim == 3:
        return segment[:, JointId.INDEX_END]
    if segment.ndim == 2 and segment.shape[1] == 3:
        return segment
    raise ValueError(f"expected a (T, 20, 3) window or a (T, 3) path, got {segment.shape}")


def trajectory_descriptor(segment, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Normalized orientation histogram of the INDEX_END path after PCA to 2D."""
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    path = index_tip_path(segment)
    if len(path) < 3:
        raise ValueError("trajectory descriptor needs at least 3 frames")
    theta = orientation_angles(project_2d(path))
    if len(theta) == 0:
        warnings.warn("static trajectory: returning a uniform histogram")
        return np.full(n_bins, 1.0 / n_bins)
    hist = np.bincount(angle_bins(theta, n_bins), minlength=n_bins).astype(float)
    return hist / hist.sum()


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


class ClassTemplates(dict):
    """GestureClass -> mean orientation histogram."""

    @classmethod
    def build(cls, segments_by_class, n_bins: int = DEFAULT_BINS) -> "ClassTemplates":
        t = cls()
        for label, segments in segments_by_class.items():
            hists = [trajectory_descriptor(s, n_bins) for s in segments]
            if not hists:
                raise ValueError(f"no training segments for {GestureClass(label).name}")
            t[GestureClass(label)] = np.mean(hists, axis=0)
        return t

    def save(self, path) -> None:
        lines = [f"{c.name};" + ",".join(repr(float(v)) for v in h) for c, h in self.items()]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ClassTemplates":
        t = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                name, values = line.split(";")
                t[GestureClass.parse(name)] = np.array([float(v) for v in values.split(",")])
        return t

    def similarities(self, descriptor) -> dict:
        return {c: cosine_similarity(descriptor, h) for c, h in self.items()}

    def nearest(self, descriptor) -> tuple[GestureClass, float]:
        sims = self.similarities(descriptor)
        best = max(sims, key=lambda c: (sims[c], -int(c)))
        return best, sims[best]


def classify_by_histogram(descriptor, templates: ClassTemplates, base_prediction, lam: float = 0.5):
    """Combine a base (class, confidence) with the best template match.

    Agreement on a template class gives lam * confidence + (1 - lam) * similarity;
    disagreement lets the higher score win. Classes without a template are
    returned unchanged.
    """
    base_label, base_conf = base_prediction
    base_label = GestureClass(base_label)
    if np.linalg.norm(descriptor) == 0 or base_label not in templates:
        return base_label, float(base_conf)
    best, sim = templates.nearest(descriptor)
    if best == base_label:
        return best, lam * float(base_conf) + (1.0 - lam) * sim
    if sim > base_conf:
        return best, sim
    return base_label, float(base_conf)
