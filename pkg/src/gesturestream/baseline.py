"""Dissimilarity-vector baseline with per-class linear SVMs and a sliding-window detector."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import FINGERTIPS, GESTURES, AnnotationSpan, GestureClass, JointId, crop_window, resample_sequence

RESAMPLE_STEPS = 20
BLOCK = 12  # palm trajectory, 9 articulation, path length, velocity


@dataclass
class GestureDictionary:
    windows: np.ndarray  # (n, 20, 20, 3) resampled entries
    labels: np.ndarray  # (n,) class ordinals, NON_GESTURE for negatives
    is_representation: np.ndarray  # (n,) bool
    mean_length: dict  # GestureClass -> frames

    def __post_init__(self):
        self._rep_features = None

    @property
    def representation(self) -> np.ndarray:
        return self.windows[self.is_representation]

    @property
    def training(self) -> tuple[np.ndarray, np.ndarray]:
        keep = ~self.is_representation
        return self.windows[keep], self.labels[keep]

    def rep_features(self) -> "_WindowFeatures":
        if self._rep_features is None:
            self._rep_features = _WindowFeatures.of(self.representation)
        return self._rep_features

    def save(self, path) -> None:
        classes = sorted(self.mean_length, key=int)
        np.savez(
            path,
            windows=self.windows,
            labels=self.labels,
            is_representation=self.is_representation,
            length_classes=np.array([int(c) for c in classes]),
            length_values=np.array([self.mean_length[c] for c in classes]),
        )

    @classmethod
    def load(cls, path) -> "GestureDictionary":
        with np.load(path) as data:
            lengths = {GestureClass(int(c)): int(v) for c, v in zip(data["length_classes"], data["length_values"])}
            return cls(data["windows"], data["labels"], data["is_representation"].astype(bool), lengths)


def _unannotated_stretches(n_frames: int, spans) -> list[tuple[int, int]]:
    covered = np.zeros(n_frames, dtype=bool)
    for s in spans:
        covered[s.start_frame : s.end_frame + 1] = True
    stretches, start = [], None
    for t in range(n_frames + 1):
        free = t < n_frames and not covered[t]
        if free and start is None:
            start = t
        elif not free and start is not None:
            stretches.append((start, t))
            start = None
    return stretches


def _span_iou(a0, a1, b0, b1) -> float:
    inter = min(a1, b1) - max(a0, b0) + 1
    return max(inter, 0) / ((a1 - a0 + 1) + (b1 - b0 + 1) - max(inter, 0))


def _boundary_crops(sequences, annotations, count: int, max_iou: float, rng) -> list[np.ndarray]:
    """Windows straddling a gesture boundary whose IoU with every span stays <= ``max_iou``."""
    by_id = {s.id: s for s in sequences}
    spans_by_seq = {}
    for s in annotations:
        spans_by_seq.setdefault(s.sequence_id, []).append(s)
    out = []
    for _ in range(50 * max(count, 1)):
        if len(out) >= count:
            break
        g = annotations[rng.integers(len(annotations))]
        seq = by_id[g.sequence_id]
        length = g.length
        shift = int(rng.integers(int(0.4 * length), length)) * (1 if rng.random() < 0.5 else -1)
        start = g.start_frame + shift
        if start < 0 or start + length > len(seq):
            continue
        end = start + length - 1
        if all(_span_iou(start, end, o.start_frame, o.end_frame) <= max_iou for o in spans_by_seq[seq.id]):
            out.append(resample_sequence(crop_window(seq, start, length), RESAMPLE_STEPS))
    if len(out) < count:
        warnings.warn(f"only {len(out)} of {count} boundary windows could be sampled")
    return out


def build_dictionary(sequences, annotations, non_gesture_count: int, rng_seed: int = 0,
                     boundary_negatives: int = 0, boundary_max_iou: float = 0.4) -> GestureDictionary:
    """Crop, resample and split labeled gestures plus random non-gesture windows.

    Non-gesture windows come from unannotated stretches. ``boundary_negatives``
    optionally adds windows that straddle a gesture boundary (IoU with every
    span at most ``boundary_max_iou``), also labeled non-gesture; this teaches
    the SVMs to reject half-overlapping windows during sliding detection.
    """
    if not annotations:
        raise ValueError("build_dictionary needs at least one annotation")
    rng = np.random.default_rng(rng_seed)
    by_id = {s.id: s for s in sequences}

    windows, labels, lengths = [], [], {}
    for span in annotations:
        seq = by_id[span.sequence_id]
        span.check_within(len(seq))
        win = crop_window(seq, span.start_frame, span.length)
        windows.append(resample_sequence(win, RESAMPLE_STEPS))
        labels.append(int(span.label))
        lengths.setdefault(span.label, []).append(span.length)

    gesture_lengths = np.array([s.length for s in annotations])
    spans_by_seq = {}
    for s in annotations:
        spans_by_seq.setdefault(s.sequence_id, []).append(s)
    stretches = {seq.id: _unannotated_stretches(len(seq), spans_by_seq.get(seq.id, [])) for seq in sequences}

    drawn = 0
    attempts = 0
    skipped = set()
    while drawn < non_gesture_count and attempts < 50 * max(non_gesture_count, 1):
        attempts += 1
        seq = sequences[rng.integers(len(sequences))]
        length = int(rng.choice(gesture_lengths))
        fits = [(a, b) for a, b in stretches[seq.id] if b - a >= max(length, 2)]
        if not fits:
            if seq.id not in skipped:
                warnings.warn(f"sequence {seq.id}: no unannotated stretch of {length} frames, skipping")
                skipped.add(seq.id)
            continue
        a, b = fits[rng.integers(len(fits))]
        start = int(rng.integers(a, b - length + 1))
        windows.append(resample_sequence(crop_window(seq, start, length), RESAMPLE_STEPS))
        labels.append(int(GestureClass.NON_GESTURE))
        drawn += 1
    if drawn < non_gesture_count:
        warnings.warn(f"only {drawn} of {non_gesture_count} non-gesture windows could be sampled")

    labels = np.array(labels, dtype=int)
    is_rep = np.zeros(len(labels), dtype=bool)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        rng.shuffle(idx)
        is_rep[idx[: len(idx) // 2]] = True
    if boundary_negatives:
        # training-only: they never become dissimilarity axes
        extra = _boundary_crops(sequences, list(annotations), boundary_negatives, boundary_max_iou, rng)
        windows.extend(extra)
        labels = np.concatenate([labels, np.full(len(extra), int(GestureClass.NON_GESTURE))])
        is_rep = np.concatenate([is_rep, np.zeros(len(extra), dtype=bool)])

    mean_length = {c: int(round(np.mean(v))) for c, v in lengths.items()}
    return GestureDictionary(np.array(windows), labels, is_rep, mean_length)


@dataclass
class _WindowFeatures:
    palm: np.ndarray  # (n, 20, 3)
    articulation: np.ndarray  # (n, 9, 20)
    path_length: np.ndarray  # (n,)
    speed: np.ndarray  # (n, 19) per-step palm displacement norms

    @classmethod
    def of(cls, windows) -> "_WindowFeatures":
        windows = np.asarray(windows, dtype=float)
        palm = windows[:, :, JointId.PALM]
        steps = np.linalg.norm(np.diff(palm, axis=1), axis=2)
        tips = windows[:, :, list(FINGERTIPS)]
        adjacent = np.linalg.norm(tips[:, :, 1:] - tips[:, :, :-1], axis=3)
        to_palm = np.linalg.norm(tips - windows[:, :, [JointId.PALM]], axis=3)
        # same layout as features.articulation_distances, batched
        art = np.concatenate([adjacent, to_palm], axis=2).transpose(0, 2, 1)
        return cls(palm, art, steps.sum(axis=1), steps)


def dissimilarity_matrix(queries, dictionary: GestureDictionary, chunk: int = 256) -> np.ndarray:
    """Dissimilarity vectors of many 20-step queries, shape ``(n_queries, 12 * n_rep)``.

    Each representative contributes a contiguous block of 12 values: palm
    trajectory distance, 9 articulation trace differences, palm path length
    difference, velocity magnitude difference.
    """
    queries = np.asarray(queries, dtype=float)
    if queries.ndim == 3:
        queries = queries[None]
    if queries.shape[1] != RESAMPLE_STEPS:
        raise ValueError(f"queries must be resampled to {RESAMPLE_STEPS} steps")
    reps = dictionary.rep_features()
    n_rep = len(reps.path_length)
    out = np.empty((len(queries), n_rep, BLOCK))
    for lo in range(0, len(queries), chunk):
        q = _WindowFeatures.of(queries[lo : lo + chunk])
        sl = slice(lo, lo + len(q.path_length))
        out[sl, :, 0] = np.linalg.norm(q.palm[:, None] - reps.palm[None], axis=3).sum(axis=2)
        out[sl, :, 1:10] = np.abs(q.articulation[:, None] - reps.articulation[None]).sum(axis=3)
        out[sl, :, 10] = np.abs(q.path_length[:, None] - reps.path_length[None])
        out[sl, :, 11] = np.abs(q.speed[:, None] - reps.speed[None]).sum(axis=2)
    return out.reshape(len(queries), n_rep * BLOCK)


def dissimilarity_vector(query, dictionary: GestureDictionary) -> np.ndarray:
    return dissimilarity_matrix(np.asarray(query)[None], dictionary)[0]


@dataclass
class LinearSvmModel:
    label: GestureClass
    weights: np.ndarray
    bias: float

    def decision(self, x) -> np.ndarray:
        return np.asarray(x) @ self.weights + self.bias


def fit_linear_svm(x, y, epochs: int = 200, lr: float = 0.05, reg: float = 1e-3, seed: int = 0,
                   batch_size: int = 32, balanced: bool = True) -> tuple[np.ndarray, float]:
    """Minimize reg/2 |w|^2 + mean_i c_i max(0, 1 - y_i (w.x_i + b)) by minibatch subgradient descent.

    ``y`` holds +1/-1. With ``balanced`` each class's hinge terms are reweighted
    so both classes carry equal total weight.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = x.shape
    if balanced and 0 < np.sum(y > 0) < n:
        c = np.where(y > 0, n / (2.0 * np.sum(y > 0)), n / (2.0 * np.sum(y < 0)))
    else:
        c = np.ones(n)
    rng = np.random.default_rng(seed)
    w = np.zeros(d)
    b = 0.0
    for epoch in range(epochs):
        step = lr / np.sqrt(1.0 + epoch)
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            margin = y[idx] * (x[idx] @ w + b)
            active = margin < 1.0
            coef = (c[idx] * y[idx])[active]
            grad_w = reg * w - coef @ x[idx][active] / len(idx)
            grad_b = -coef.sum() / len(idx)
            w -= step * grad_w
            b -= step * grad_b
    return w, float(b)


def hinge_loss(w, b, x, y) -> float:
    return float(np.mean(np.maximum(0.0, 1.0 - np.asarray(y) * (np.asarray(x) @ w + b))))


def train_svms(dictionary: GestureDictionary, epochs: int = 200, lr: float = 0.05, reg: float = 1e-3,
               seed: int = 0) -> list[LinearSvmModel]:
    """One gesture-vs-rest linear SVM per class on the non-representation entries.

    Features are standardized on the training entries and the scaling is folded
    back into the returned weights, so models act on raw dissimilarity vectors.
    """
    windows, labels = dictionary.training
    for cls in GESTURES:
        if not np.any(labels == cls):
            raise ValueError(f"no training examples for class {cls.name}")
    if not np.any(labels == GestureClass.NON_GESTURE):
        raise ValueError("no non-gesture examples: cannot train gesture-vs-non-gesture SVMs")
    x = dissimilarity_matrix(windows, dictionary)
    mu = x.mean(axis=0)
    sigma = x.std(axis=0)
    sigma[sigma < 1e-12] = 1.0
    z = (x - mu) / sigma
    models = []
    for cls in GESTURES:
        y = np.where(labels == cls, 1.0, -1.0)
        w, b = fit_linear_svm(z, y, epochs=epochs, lr=lr, reg=reg, seed=seed + int(cls))
        models.append(LinearSvmModel(cls, w / sigma, b - float(np.dot(w, mu / sigma))))
    return models


def save_svms(models, path) -> None:
    lines = [f"{m.label.name};{m.bias!r};" + ",".join(repr(float(v)) for v in m.weights) for m in models]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_svms(path) -> list[LinearSvmModel]:
    models = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        name, bias, weights = line.split(";")
        models.append(LinearSvmModel(GestureClass.parse(name), np.array([float(v) for v in weights.split(",")]),
                                     float(bias)))
    return models


def merge_hits(hit_times, length: int, stride: int) -> list[tuple[int, int, list[int]]]:
    """Group consecutive grid hits; k hits ending at t give frames [t - length - (k-1)*stride + 1, t]."""
    runs = []
    for t in hit_times:
        if runs and t - runs[-1][-1] == stride:
            runs[-1].append(t)
        else:
            runs.append([t])
    return [(run[0] - length + 1, run[-1], run) for run in runs]


def resample_windows(positions, starts, length: int) -> np.ndarray:
    """``resample_sequence`` of many equal-length windows at once, shape ``(n, 20, 20, 3)``."""
    u = np.arange(RESAMPLE_STEPS) * (length - 1) / (RESAMPLE_STEPS - 1)
    lo = np.minimum(np.floor(u).astype(int), length - 2)
    frac = (u - lo)[None, :, None, None]
    idx = np.asarray(starts)[:, None] + lo[None, :]
    return positions[idx] * (1.0 - frac) + positions[idx + 1] * frac


def grid_margins(seq, models, dictionary: GestureDictionary, stride: int = 6) -> dict:
    """SVM margins on the stride grid: ``{label: [(t, margin), ...]}`` for windows ending at t."""
    n = len(seq)
    grid = np.arange(stride - 1, n, stride)
    table = {}
    for model in models:
        length = dictionary.mean_length[model.label]
        times = grid[grid - length + 1 >= 0]
        if len(times) == 0 or length < 2:
            table[model.label] = []
            continue
        queries = resample_windows(seq.positions, times - length + 1, length)
        margins = model.decision(dissimilarity_matrix(queries, dictionary))
        table[model.label] = list(zip(times.tolist(), margins.tolist()))
    return table


def events_from_margins(table, lengths, seq_id: str, stride: int = 6) -> list[AnnotationSpan]:
    """Merge positive grid margins into events, then drop cross-class overlaps by margin."""
    candidates = []  # (margin, label, start, end)
    for label, scored in table.items():
        margin_at = dict(scored)
        prev_end = -1
        for start, end, run in merge_hits([t for t, m in scored if m > 0], lengths[label], stride):
            # runs separated by a single miss would overlap; keep events disjoint per class
            start = max(start, prev_end + 1, 0)
            candidates.append((max(margin_at[t] for t in run), label, start, end))
            prev_end = end

    kept = []
    for margin, label, start, end in sorted(candidates, key=lambda c: (-c[0], int(c[1]), c[2])):
        if any(k[1] != label and start <= k[3] and k[2] <= end for k in kept):
            continue
        kept.append((margin, label, start, end))
    kept.sort(key=lambda c: (c[2], int(c[1])))
    return [AnnotationSpan(seq_id, label, start, end) for _, label, start, end in kept]


def detect_sliding(seq, models, dictionary: GestureDictionary, stride: int = 6) -> list[AnnotationSpan]:
    table = grid_margins(seq, models, dictionary, stride)
    return events_from_margins(table, dictionary.mean_length, seq.id, stride)
