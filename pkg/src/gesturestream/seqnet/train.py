from __future__ import annotations

import numpy as np

from .layers import Network
from .losses import frame_loss
from .optim import Adam


class NonFiniteLoss(FloatingPointError):
    pass


def pad_batch(sequences, labels):
    """Stack variable-length ``(T_i, d)`` inputs into a zero-padded batch with a frame mask."""
    T = max(len(s) for s in sequences)
    d = sequences[0].shape[1]
    x = np.zeros((len(sequences), T, d))
    y = np.zeros((len(sequences), T), dtype=int)
    mask = np.zeros((len(sequences), T), dtype=bool)
    for i, (s, lab) in enumerate(zip(sequences, labels)):
        x[i, : len(s)] = s
        y[i, : len(s)] = lab
        mask[i, : len(s)] = True
    return x, y, mask


def train_step(net: Network, sequences, labels, optimizer: Adam, gamma: float = 1.0) -> float:
    """One forward/backward/Adam update on a batch of labeled frame sequences.

    ``gamma=0`` trains with plain cross-entropy. Returns the batch loss.
    """
    x, y, mask = pad_batch(sequences, labels)
    net.zero_grad()
    logits = net.forward(x, mask, train=True)
    loss, dlogits = frame_loss(logits, y, mask, gamma=gamma)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"non-finite loss {loss} (batch of {len(sequences)}, {int(mask.sum())} frames)")
    net.backward(dlogits)
    optimizer.step()
    return float(loss)
