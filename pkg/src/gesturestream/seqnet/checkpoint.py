"""Self-describing text checkpoints.

Layout::

    seqnet-checkpoint 1
    layers <n>
    layer <kind> key=value ...
    ...
    tensor <name> <dim0,dim1,...>
    <space-separated values>
    ...
    end

Extra sections (normalization stats, configs) may follow ``end``; readers
ignore anything after it.
"""

from __future__ import annotations

import numpy as np

from .layers import GRU, BatchNorm, Dense, Network, ShiftNode

MAGIC = "seqnet-checkpoint"
VERSION = 1


def _format_value(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def network_lines(net: Network) -> list[str]:
    lines = [f"{MAGIC} {VERSION}", f"layers {len(net.layers)}"]
    for layer in net.layers:
        fields = " ".join(f"{k}={_format_value(v)}" for k, v in layer.config().items())
        lines.append(f"layer {layer.kind} {fields}")
    for i, t in enumerate(net.params() + net.buffers()):
        shape = ",".join(str(s) for s in t.shape)
        lines.append(f"tensor {i}:{t.name} {shape}")
        lines.append(" ".join(repr(float(v)) for v in t.values.ravel()))
    lines.append("end")
    return lines


def _build_layer(kind: str, cfg: dict, index: int):
    name = f"l{index}"
    if kind == "dense":
        return Dense(cfg["in"], cfg["out"], bias=bool(cfg["bias"]), activation=cfg["activation"], name=name)
    if kind == "gru":
        return GRU(cfg["in"], cfg["out"], name=name)
    if kind == "shift_node":
        return ShiftNode(cfg["in"], cfg["out"], distance=cfg["distance"], fraction=cfg["fraction"],
                         activation=cfg["activation"], momentum=cfg["momentum"], name=name)
    if kind == "batchnorm":
        return BatchNorm(cfg["in"], momentum=cfg["momentum"], eps=cfg["eps"], name=name)
    raise ValueError(f"unknown layer kind {kind!r}")


def parse_network(lines: list[str]) -> tuple[Network, int]:
    """Rebuild a network from checkpoint lines; also returns the index after ``end``."""
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ValueError("not a seqnet checkpoint")
    if int(head[1]) != VERSION:
        raise ValueError(f"unsupported checkpoint version {head[1]}")
    n_layers = int(lines[1].split()[1])
    layers = []
    for i in range(n_layers):
        parts = lines[2 + i].split()
        if parts[0] != "layer":
            raise ValueError(f"line {3 + i}: expected a layer record")
        cfg = {k: _parse_value(v) for k, v in (p.split("=", 1) for p in parts[2:])}
        layers.append(_build_layer(parts[1], cfg, i))
    net = Network(layers)
    tensors = net.params() + net.buffers()
    pos = 2 + n_layers
    for t in tensors:
        parts = lines[pos].split()
        if parts[0] != "tensor":
            raise ValueError(f"line {pos + 1}: expected a tensor record")
        shape = tuple(int(s) for s in parts[2].split(",")) if parts[2] else ()
        if shape != t.shape:
            raise ValueError(f"line {pos + 1}: tensor {parts[1]} has shape {shape}, layer expects {t.shape}")
        values = np.array([float(v) for v in lines[pos + 1].split()])
        t.values = values.reshape(shape)
        t.grad = np.zeros_like(t.values)
        pos += 2
    if lines[pos].strip() != "end":
        raise ValueError(f"line {pos + 1}: expected 'end'")
    return net, pos + 1


def save_network(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(network_lines(net)) + "\n")


def load_network(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read().splitlines())[0]
