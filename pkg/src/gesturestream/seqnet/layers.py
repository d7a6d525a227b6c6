"""Layers with hand-derived backward passes.

Every layer maps a batch ``(B, T, d_in)`` to ``(B, T, d_out)``. ``mask`` is a
``(B, T)`` boolean array marking real (non-padding) frames; padding always
sits at the end of a sequence, so causal layers never read it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_floating(a):
    """Keep float64/longdouble inputs as they are; promote everything else to float64."""
    a = np.asarray(a)
    return a if np.issubdtype(a.dtype, np.floating) else a.astype(float)


class Tensor:
    """A parameter: values plus an accumulated gradient of the same shape."""

    def __init__(self, values, name: str = ""):
        self.values = as_floating(values).copy()
        self.grad = np.zeros_like(self.values)
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Tensor({self.name!r}, shape={self.shape})"


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = ("none", "tanh", "relu")


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _activate_backward(dy, y, kind):
    if kind == "tanh":
        return dy * (1.0 - y * y)
    if kind == "relu":
        return dy * (y > 0)
    return dy


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    kind = "layer"
    in_dim: int
    out_dim: int

    def params(self) -> list[Tensor]:
        return []

    def buffers(self) -> list[Tensor]:
        """Non-trainable state saved with checkpoints."""
        return []

    def config(self) -> dict:
        return {"in": self.in_dim, "out": self.out_dim}

    def forward(self, x, mask=None, train=False):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError


class Dense(Layer):
    """y = act(x W^T + b), applied to every frame."""

    kind = "dense"

    def __init__(self, in_dim, out_dim, bias=True, activation="none", rng=None, name="dense"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.activation = activation
        self.W = Tensor(uniform_init(rng, (out_dim, in_dim), in_dim), f"{name}.W")
        self.b = Tensor(uniform_init(rng, (out_dim,), in_dim), f"{name}.b") if bias else None

    def config(self):
        return {"in": self.in_dim, "out": self.out_dim, "bias": int(self.b is not None), "activation": self.activation}

    def params(self):
        return [self.W] + ([self.b] if self.b is not None else [])

    def forward(self, x, mask=None, train=False):
        z = x @ self.W.values.T
        if self.b is not None:
            z = z + self.b.values
        self._x = x
        self._y = _activate(z, self.activation)
        return self._y

    def backward(self, dy):
        dz = _activate_backward(dy, self._y, self.activation)
        flat_dz = dz.reshape(-1, self.out_dim)
        self.W.grad += flat_dz.T @ self._x.reshape(-1, self.in_dim)
        if self.b is not None:
            self.b.grad += flat_dz.sum(axis=0)
        return dz @ self.W.values


@dataclass
class GruCellParams:
    """Weights of one GRU cell; input matrices are (H, D), recurrent ones (H, H)."""

    W_xr: np.ndarray
    W_hr: np.ndarray
    W_xu: np.ndarray
    W_hu: np.ndarray
    W_xc: np.ndarray
    W_hc: np.ndarray
    b_xr: np.ndarray
    b_hr: np.ndarray
    b_xu: np.ndarray
    b_hu: np.ndarray
    b_xc: np.ndarray
    b_hc: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.W_hr.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_xr.shape[1]

    @classmethod
    def zeros(cls, input_size, hidden_size) -> "GruCellParams":
        mats = {k: np.zeros((hidden_size, input_size if k[2] == "x" else hidden_size))
                for k in ("W_xr", "W_hr", "W_xu", "W_hu", "W_xc", "W_hc")}
        vecs = {k: np.zeros(hidden_size) for k in ("b_xr", "b_hr", "b_xu", "b_hu", "b_xc", "b_hc")}
        return cls(**mats, **vecs)


@dataclass
class GruStepCache:
    x: np.ndarray
    h_prev: np.ndarray
    r: np.ndarray
    u: np.ndarray
    c: np.ndarray
    hc: np.ndarray  # W_hc h_prev + b_hc


def gru_cell_forward(p: GruCellParams, x_t, h_prev, x_proj=None):
    """One GRU transition; works on single vectors or on batches (B, D).

    r = sigmoid(W_xr x + b_xr + W_hr h + b_hr)
    u = sigmoid(W_xu x + b_xu + W_hu h + b_hu)
    c = tanh(W_xc x + b_xc + r * (W_hc h + b_hc))
    h' = u * h + (1 - u) * c

    ``x_proj`` optionally supplies the three precomputed input projections.
    Returns ``(h_t, cache)``.
    """
    x_t = as_floating(x_t)
    h_prev = as_floating(h_prev)
    if x_t.shape[-1] != p.input_size or h_prev.shape[-1] != p.hidden_size:
        raise ValueError(
            f"GRU cell expects input {p.input_size} / hidden {p.hidden_size}, "
            f"got {x_t.shape[-1]} / {h_prev.shape[-1]}"
        )
    if x_proj is None:
        x_proj = (x_t @ p.W_xr.T + p.b_xr, x_t @ p.W_xu.T + p.b_xu, x_t @ p.W_xc.T + p.b_xc)
    xr, xu, xc = x_proj
    r = sigmoid(xr + h_prev @ p.W_hr.T + p.b_hr)
    u = sigmoid(xu + h_prev @ p.W_hu.T + p.b_hu)
    hc = h_prev @ p.W_hc.T + p.b_hc
    c = np.tanh(xc + r * hc)
    h = u * h_prev + (1.0 - u) * c
    return h, GruStepCache(x_t, h_prev, r, u, c, hc)


_GRU_NAMES = ("W_xr", "W_hr", "W_xu", "W_hu", "W_xc", "W_hc", "b_xr", "b_hr", "b_xu", "b_hu", "b_xc", "b_hc")


class GRU(Layer):
    """Unidirectional GRU over time, h_0 = 0. Outputs every hidden state."""

    kind = "gru"

    def __init__(self, in_dim, hidden, rng=None, name="gru"):
        rng = rng or np.random.default_rng(0)
        self.in_dim, self.out_dim = in_dim, hidden
        self.tensors = {}
        for key in _GRU_NAMES:
            if key[0] == "W":
                shape, fan_in = ((hidden, in_dim), in_dim) if key[2] == "x" else ((hidden, hidden), hidden)
            else:
                shape, fan_in = (hidden,), hidden
            self.tensors[key] = Tensor(uniform_init(rng, shape, fan_in), f"{name}.{key}")

    def params(self):
        return [self.tensors[k] for k in _GRU_NAMES]

    def cell_params(self) -> GruCellParams:
        return GruCellParams(**{k: t.values for k, t in self.tensors.items()})

    def forward(self, x, mask=None, train=False):
        p = self.cell_params()
        B, T, _ = x.shape
        proj = (x @ p.W_xr.T + p.b_xr, x @ p.W_xu.T + p.b_xu, x @ p.W_xc.T + p.b_xc)
        h = np.zeros((B, self.out_dim), dtype=x.dtype)
        out = np.empty((B, T, self.out_dim), dtype=x.dtype)
        self._caches = []
        for t in range(T):
            h, cache = gru_cell_forward(p, x[:, t], h, (proj[0][:, t], proj[1][:, t], proj[2][:, t]))
            out[:, t] = h
            self._caches.append(cache)
        return out

    def backward(self, dy):
        p = self.cell_params()
        g = {k: np.zeros_like(t.values) for k, t in self.tensors.items()}
        B, T, H = dy.shape
        dx = np.empty((B, T, self.in_dim), dtype=dy.dtype)
        dh = np.zeros((B, H), dtype=dy.dtype)
        for t in reversed(range(T)):
            c = self._caches[t]
            dh = dh + dy[:, t]
            du = dh * (c.h_prev - c.c)
            dcand = dh * (1.0 - c.u)
            dh_prev = dh * c.u
            dac = dcand * (1.0 - c.c * c.c)
            dhc = dac * c.r
            dar = dac * c.hc * c.r * (1.0 - c.r)
            dau = du * c.u * (1.0 - c.u)
            g["W_xr"] += dar.T @ c.x
            g["W_xu"] += dau.T @ c.x
            g["W_xc"] += dac.T @ c.x
            g["W_hr"] += dar.T @ c.h_prev
            g["W_hu"] += dau.T @ c.h_prev
            g["W_hc"] += dhc.T @ c.h_prev
            g["b_xr"] += dar.sum(axis=0)
            g["b_hr"] += dar.sum(axis=0)
            g["b_xu"] += dau.sum(axis=0)
            g["b_hu"] += dau.sum(axis=0)
            g["b_xc"] += dac.sum(axis=0)
            g["b_hc"] += dhc.sum(axis=0)
            dx[:, t] = dar @ p.W_xr + dau @ p.W_xu + dac @ p.W_xc
            dh = dh_prev + dar @ p.W_hr + dau @ p.W_hu + dhc @ p.W_hc
        for k, t in self.tensors.items():
            t.grad += g[k]
        return dx


def temporal_shift(features, distance: int = 5, fraction: float = 0.5):
    """Replace the first ``floor(d * fraction)`` channels of frame t with those of frame t - distance.

    Works on ``(T, d)`` or ``(B, T, d)``; frames t < distance receive zeros.
    """
    features = np.asarray(features)
    k = int(features.shape[-1] * fraction)
    out = features.copy()
    out[..., :, :k] = 0.0
    if distance < features.shape[-2]:
        out[..., distance:, :k] = features[..., : features.shape[-2] - distance, :k]
    return out


def temporal_shift_backward(dy, distance: int = 5, fraction: float = 0.5):
    k = int(dy.shape[-1] * fraction)
    dx = dy.copy()
    dx[..., :, :k] = 0.0
    if distance < dy.shape[-2]:
        dx[..., : dy.shape[-2] - distance, :k] = dy[..., distance:, :k]
    return dx


class BatchNorm(Layer):
    """Per-feature normalization; batch statistics over real frames when training."""

    kind = "batchnorm"

    def __init__(self, dim, momentum=0.9, eps=1e-5, name="bn"):
        self.in_dim = self.out_dim = dim
        self.momentum, self.eps = momentum, eps
        self.gamma = Tensor(np.ones(dim), f"{name}.gamma")
        self.beta = Tensor(np.zeros(dim), f"{name}.beta")
        self.running_mean = Tensor(np.zeros(dim), f"{name}.running_mean")
        self.running_var = Tensor(np.ones(dim), f"{name}.running_var")

    def config(self):
        return {"in": self.in_dim, "out": self.out_dim, "momentum": self.momentum, "eps": self.eps}

    def params(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return [self.running_mean, self.running_var]

    def forward(self, x, mask=None, train=False):
        if not train:
            xhat = (x - self.running_mean.values) / np.sqrt(self.running_var.values + self.eps)
            return self.gamma.values * xhat + self.beta.values
        w = np.ones(x.shape[:-1], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        w = w[..., None].astype(x.dtype)
        n = w.sum()
        mean = (x * w).sum(axis=(0, 1)) / n
        var = (((x - mean) ** 2) * w).sum(axis=(0, 1)) / n
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv_std
        m = self.momentum
        self.running_mean.values = m * self.running_mean.values + (1 - m) * mean
        self.running_var.values = m * self.running_var.values + (1 - m) * var
        self._cache = (xhat, inv_std, w, n)
        return self.gamma.values * xhat + self.beta.values

    def backward(self, dy):
        xhat, inv_std, w, n = self._cache
        dy = dy * w
        self.gamma.grad += (dy * xhat).sum(axis=(0, 1))
        self.beta.grad += dy.sum(axis=(0, 1))
        dxhat = dy * self.gamma.values
        s1 = dxhat.sum(axis=(0, 1))
        s2 = (dxhat * xhat).sum(axis=(0, 1))
        return w * inv_std * (dxhat - s1 / n - xhat * s2 / n)


class ShiftNode(Layer):
    """Temporal shift -> FC_shift, plus bias-free FC_residual on the unshifted input; sum, batch norm, activation."""

    kind = "shift_node"

    def __init__(self, in_dim, out_dim, distance=5, fraction=0.5, activation="relu", momentum=0.9, rng=None,
                 name="sn"):
        rng = rng or np.random.default_rng(0)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.distance, self.fraction = distance, fraction
        self.activation = activation
        self.fc_shift = Dense(in_dim, out_dim, bias=True, rng=rng, name=f"{name}.shift")
        self.fc_residual = Dense(in_dim, out_dim, bias=False, rng=rng, name=f"{name}.residual")
        self.bn = BatchNorm(out_dim, momentum=momentum, name=f"{name}.bn")

    def config(self):
        return {"in": self.in_dim, "out": self.out_dim, "distance": self.distance, "fraction": self.fraction,
                "activation": self.activation, "momentum": self.bn.momentum}

    def params(self):
        return self.fc_shift.params() + self.fc_residual.params() + self.bn.params()

    def buffers(self):
        return self.bn.buffers()

    def forward(self, x, mask=None, train=False):
        f_shift = self.fc_shift.forward(temporal_shift(x, self.distance, self.fraction))
        f_residual = self.fc_residual.forward(x)
        z = self.bn.forward(f_shift + f_residual, mask, train)
        self._y = _activate(z, self.activation)
        return self._y

    def backward(self, dy):
        dz = self.bn.backward(_activate_backward(dy, self._y, self.activation))
        dx = self.fc_residual.backward(dz)
        dx += temporal_shift_backward(self.fc_shift.backward(dz), self.distance, self.fraction)
        return dx


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Network:
    """A static chain of layers ending in class logits."""

    def __init__(self, layers):
        self.layers = list(layers)
        self.validate()

    def validate(self) -> None:
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer {i + 1} ({b.kind}) expects width {b.in_dim} but layer {i} ({a.kind}) emits {a.out_dim}"
                )

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.params()]

    def buffers(self) -> list[Tensor]:
        return [b for layer in self.layers for b in layer.buffers()]

    def astype(self, dtype) -> None:
        """Cast every parameter and buffer in place."""
        for t in self.params() + self.buffers():
            t.values = t.values.astype(dtype)
            t.grad = np.zeros_like(t.values)

    def relu_pattern(self) -> np.ndarray:
        """On/off state of every ReLU unit in the last forward pass."""
        parts = [layer._y.ravel() > 0 for layer in self.layers if getattr(layer, "activation", None) == "relu"]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=bool)

    def n_params(self) -> int:
        return sum(p.values.size for p in self.params())

    def zero_grad(self) -> None:
        for p in self.params():
            p.zero_grad()

    def forward(self, x, mask=None, train=False):
        x = as_floating(x)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        for i, layer in enumerate(self.layers):
            if x.shape[-1] != layer.in_dim:
                raise ValueError(f"layer {i} ({layer.kind}) expects width {layer.in_dim}, got {x.shape[-1]}")
            x = layer.forward(x, mask, train)
        return x[0] if squeeze else x

    def backward(self, dlogits):
        d = dlogits
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def predict_proba(self, x):
        return softmax(self.forward(x, train=False))


def network_forward(net: Network, x):
    """Per-frame class probabilities for one ``(T, d)`` input, inference mode."""
    return net.predict_proba(as_floating(x))
