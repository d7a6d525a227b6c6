"""Per-frame classification losses with gradients w.r.t. logits."""

from __future__ import annotations

import numpy as np

from .layers import softmax

P_FLOOR = 1e-12


def focal_loss(p, true_class: int, gamma: float = 1.0) -> float:
    """-(1 - p_true)^gamma * log(p_true) for one probability vector."""
    if gamma < 0 or not np.isfinite(gamma):
        raise ValueError("gamma must be finite and non-negative")
    pt = max(float(np.asarray(p)[true_class]), P_FLOOR)
    return float(-((1.0 - pt) ** gamma) * np.log(pt))


def focal_loss_grad(logits, true_class: int, gamma: float = 1.0):
    """Loss and its gradient w.r.t. the logits feeding a softmax."""
    loss, grad = frame_loss(np.asarray(logits, dtype=float)[None, None], np.array([[true_class]]), gamma=gamma)
    return loss, grad[0, 0]


def frame_loss(logits, targets, mask=None, gamma: float = 1.0):
    """Mean focal loss over real frames; ``gamma=0`` is cross-entropy.

    ``logits`` (B, T, C), ``targets`` (B, T) int. Returns ``(loss, dlogits)``.
    """
    if gamma < 0 or not np.isfinite(gamma):
        raise ValueError("gamma must be finite and non-negative")
    logits = np.asarray(logits)
    targets = np.asarray(targets, dtype=int)
    if mask is None:
        mask = np.ones(targets.shape, dtype=bool)
    w = np.asarray(mask, dtype=logits.dtype)
    n = w.sum()
    if n == 0:
        raise ValueError("no frames to score")

    p = softmax(logits)
    pt = np.take_along_axis(p, targets[..., None], axis=-1)[..., 0]
    pt_c = np.maximum(pt, P_FLOOR)
    q = 1.0 - pt
    log_pt = np.log(pt_c)
    losses = -(q ** gamma) * log_pt
    # pt * dL/dpt
    if gamma == 0:
        scale = -np.ones_like(pt)
    else:
        q_pow = np.where(q > 0, q ** (gamma - 1.0) if gamma != 1 else np.ones_like(q), 0.0)
        scale = gamma * q_pow * pt * log_pt - q ** gamma
    onehot = np.zeros_like(p)
    np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
    grad = (scale * w / n)[..., None] * (onehot - p)
    # numpy scalar keeps extended precision for gradient checks
    return (losses * w).sum() / n, grad


def cross_entropy(logits, targets, mask=None):
    return frame_loss(logits, targets, mask, gamma=0.0)
