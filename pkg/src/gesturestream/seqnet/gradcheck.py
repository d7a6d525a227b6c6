"""Finite-difference verification of the hand-written backward passes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import Network
from .losses import frame_loss

MAX_PARAMS = 10_000


def analytic_gradients(net: Network, x, targets, mask=None, gamma=1.0, train=True) -> list[np.ndarray]:
    net.zero_grad()
    logits = net.forward(x, mask, train=train)
    _, dlogits = frame_loss(logits, targets, mask, gamma=gamma)
    net.backward(dlogits)
    return [p.grad.copy() for p in net.params()]


@dataclass
class GradCheckReport:
    max_rel_error: float
    n_checked: int
    n_kinks: int  # elements skipped because the perturbation switched a ReLU


def grad_check(net: Network, x, targets, mask=None, gamma=1.0, step=1e-4, train=True,
               dtype=np.longdouble) -> float:
    """Max relative error between analytic and central-difference gradients over every parameter.

    Relative error per element is |gA - gN| / max(1e-8, |gA| + |gN|).

    Both sides are evaluated in ``dtype`` (extended precision by default): a
    bias feeding batch norm has an exactly-zero gradient, and float64 rounding
    in the difference quotient alone is ~1e-12, which the 1e-8 floor turns
    into a spurious ~1e-4 relative error. The network is cast back to float64
    afterwards.
    """
    return grad_check_report(net, x, targets, mask, gamma, step, train, dtype).max_rel_error


def grad_check_report(net: Network, x, targets, mask=None, gamma=1.0, step=1e-4, train=True,
                      dtype=np.longdouble) -> GradCheckReport:
    """``grad_check`` with bookkeeping.

    An element whose +step or -step evaluation turns any ReLU on or off
    straddles a kink, where the difference quotient is not a derivative; such
    elements are skipped and counted.
    """
    if net.n_params() > MAX_PARAMS:
        raise ValueError(f"grad_check is limited to {MAX_PARAMS} parameters, net has {net.n_params()}")
    net.astype(dtype)
    try:
        return _grad_check(net, np.asarray(x, dtype=dtype), targets, mask, gamma, step, train)
    finally:
        net.astype(np.float64)


def _grad_check(net, x, targets, mask, gamma, step, train) -> GradCheckReport:
    if x.ndim == 2:
        x = x[None]
        targets = np.asarray(targets)[None]
        mask = None if mask is None else np.asarray(mask)[None]
    analytic = analytic_gradients(net, x, targets, mask, gamma, train)
    base_pattern = net.relu_pattern()

    def loss():
        return frame_loss(net.forward(x, mask, train=train), targets, mask, gamma=gamma)[0]

    worst, checked, kinks = 0.0, 0, 0
    for p, g_a in zip(net.params(), analytic):
        flat = p.values.reshape(-1)
        g_a = g_a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss()
            same = np.array_equal(net.relu_pattern(), base_pattern)
            flat[i] = orig - step
            down = loss()
            same = same and np.array_equal(net.relu_pattern(), base_pattern)
            flat[i] = orig
            if not same:
                kinks += 1
                continue
            g_n = (up - down) / (2.0 * step)
            err = abs(g_a[i] - g_n) / max(1e-8, abs(g_a[i]) + abs(g_n))
            worst = max(worst, float(err))
            checked += 1
    return GradCheckReport(worst, checked, kinks)


def standard_cases(seed: int = 0, instances: int = 4):
    """Seeded small networks covering every layer kind and both loss settings.

    Yields ``(case_name, network, x, targets)``; x is ``(B, T, d)``.
    """
    from .layers import GRU, BatchNorm, Dense, ShiftNode

    rng = np.random.default_rng(seed)
    builders = {
        "dense": lambda r: [Dense(5, 6, activation="tanh", rng=r), Dense(6, 4, rng=r)],
        "gru_8step": lambda r: [GRU(4, 5, rng=r), Dense(5, 3, rng=r)],
        "shift_nodes": lambda r: [ShiftNode(6, 6, activation="tanh", rng=r), ShiftNode(6, 5, activation="relu", rng=r),
                                  Dense(5, 3, rng=r)],
        "batchnorm": lambda r: [Dense(4, 5, rng=r), BatchNorm(5), Dense(5, 3, rng=r)],
        "focal_head": lambda r: [Dense(4, 6, activation="tanh", rng=r), Dense(6, 19, rng=r)],
    }
    for name, build in builders.items():
        for k in range(instances):
            r = np.random.default_rng(rng.integers(2**32))
            net = Network(build(r))
            T = 8 if name == "gru_8step" else 12
            x = r.normal(size=(2, T, net.in_dim))
            targets = r.integers(0, net.out_dim, size=(2, T))
            yield f"{name}#{k}", net, x, targets


def run_standard_checks(seed: int = 0, instances: int = 4, step: float = 1e-4):
    """``[(case_name, gamma, GradCheckReport)]``; focal heads use gamma 1 and 2, the rest gamma 1."""
    out = []
    for name, net, x, targets in standard_cases(seed, instances):
        gammas = (1.0, 2.0) if name.startswith("focal") else (1.0,)
        for gamma in gammas:
            out.append((name, gamma, grad_check_report(net, x, targets, gamma=gamma, step=step)))
    return out
