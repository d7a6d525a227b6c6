"""Per-frame recognizers (GRU stack and shift-node stack), training and ensembling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import N_CLASSES, GestureClass, SkeletonSequence, spans_to_labels
from .features import FeatureStats, Recipe, sequence_vectors
from .seqnet import GRU, Adam, Dense, Network, ShiftNode, train_step
from .seqnet.checkpoint import network_lines, parse_network

log = logging.getLogger(__name__)

NON = int(GestureClass.NON_GESTURE)
KINDS = ("udeepgru", "tsgr")
DEFAULT_WIDTHS = {"udeepgru": (128, 128, 128, 64), "tsgr": (128, 128, 128, 128)}


@dataclass(frozen=True)
class RecognizerConfig:
    """``widths``: uDeepGRU = feature layer then GRU stack; TSGR = one width per shift node."""

    kind: str = "tsgr"
    recipe: str = "pos_speed_accel"
    widths: tuple = ()
    gamma: float = 1.0
    seed: int = 0
    shift_distance: int = 5
    shift_fraction: float = 0.5
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown recognizer kind {self.kind!r}")
        Recipe(self.recipe)
        widths = tuple(int(w) for w in self.widths) or DEFAULT_WIDTHS[self.kind]
        object.__setattr__(self, "widths", widths)
        if self.kind == "udeepgru" and len(widths) < 2:
            raise ValueError("uDeepGRU needs a feature width and at least one GRU width")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"recognizers emit {N_CLASSES} classes")


@dataclass(frozen=True)
class TrainProtocol:
    lr: float = 2e-4
    batch: int = 10
    max_chunk: int = 256
    validation_sequences: int = 6
    epochs: int = 30
    patience: int | None = 10  # epochs without F1 gain before stopping; None trains every epoch
    seed: int = 0
    jitter_mm: float = 0.0  # Gaussian position noise redrawn each epoch; 0 disables augmentation

    def __post_init__(self):
        if min(self.lr, self.batch, self.max_chunk, self.validation_sequences, self.epochs) <= 0:
            raise ValueError("training protocol values must be positive")
        if self.jitter_mm < 0 or (self.patience is not None and self.patience < 1):
            raise ValueError("jitter must be non-negative and patience at least 1")


def build_network(config: RecognizerConfig, in_dim: int) -> Network:
    rng = np.random.default_rng(config.seed)
    w = config.widths
    if config.kind == "udeepgru":
        layers = [Dense(in_dim, w[0], activation="tanh", rng=rng, name="features")]
        prev = w[0]
        for i, h in enumerate(w[1:]):
            layers.append(GRU(prev, h, rng=rng, name=f"gru{i}"))
            prev = h
    else:
        layers, prev = [], in_dim
        for i, h in enumerate(w):
            act = "tanh" if i == 0 else "relu"
            layers.append(ShiftNode(prev, h, distance=config.shift_distance, fraction=config.shift_fraction,
                                    activation=act, rng=rng, name=f"sn{i}"))
            prev = h
    layers.append(Dense(prev, config.n_classes, rng=rng, name="classifier"))
    return Network(layers)


def frame_features(seq: SkeletonSequence, recipe: str) -> np.ndarray:
    return sequence_vectors(seq.positions, recipe, seq.rotations)


def macro_f1(true, pred) -> float:
    """Frame-level F1 averaged over gesture classes present in either stream."""
    true = np.asarray(true)
    pred = np.asarray(pred)
    scores = []
    for c in range(NON):
        t, p = true == c, pred == c
        if not (t.any() or p.any()):
            continue
        tp = np.count_nonzero(t & p)
        scores.append(2 * tp / (2 * tp + np.count_nonzero(p & ~t) + np.count_nonzero(t & ~p)))
    return float(np.mean(scores)) if scores else 1.0


def argmax_non_first(probs) -> np.ndarray:
    """Row argmax; ties go to NON_GESTURE (last column), then to the lowest ordinal."""
    probs = np.asarray(probs, dtype=float)
    best = probs.max(axis=-1, keepdims=True)
    tied = probs == best
    labels = np.argmax(tied, axis=-1)
    return np.where(tied[..., -1], probs.shape[-1] - 1, labels)


@dataclass
class Recognizer:
    config: RecognizerConfig
    net: Network
    stats: FeatureStats
    partition: tuple = ()  # ids of the training sequences this model saw
    history: list = field(default_factory=list)  # (epoch, loss, val_f1)

    def features(self, seq: SkeletonSequence) -> np.ndarray:
        return self.stats.apply(frame_features(seq, self.config.recipe))

    def predict_proba(self, seq: SkeletonSequence) -> np.ndarray:
        return self.net.predict_proba(self.features(seq))

    def predict_stream(self, seq: SkeletonSequence) -> tuple[np.ndarray, np.ndarray]:
        """Per-frame labels and ``(T, 19)`` probabilities; causal in the input."""
        probs = self.predict_proba(seq)
        return argmax_non_first(probs), probs

    def save(self, path) -> None:
        save_bundle(self, path)


def predict_stream(recognizer: Recognizer, seq: SkeletonSequence):
    return recognizer.predict_stream(seq)


def ensemble_probabilities(prob_list) -> np.ndarray:
    shapes = {np.shape(p) for p in prob_list}
    if not prob_list:
        raise ValueError("an ensemble needs at least one member")
    if len(shapes) != 1:
        raise ValueError(f"members disagree on output shape: {sorted(shapes)}")
    return np.mean(np.stack(prob_list), axis=0)


def ensemble_predict(members, seq: SkeletonSequence) -> np.ndarray:
    """Average member probabilities per frame and take the tie-aware argmax."""
    if not members:
        raise ValueError("an ensemble needs at least one member")
    if len({m.config.n_classes for m in members}) != 1 or len({m.net.out_dim for m in members}) != 1:
        raise ValueError("ensemble members have different class sets")
    return argmax_non_first(ensemble_probabilities([m.predict_proba(seq) for m in members]))


def _chunks(x, y, max_chunk):
    for lo in range(0, len(x), max_chunk):
        yield x[lo : lo + max_chunk], y[lo : lo + max_chunk]


def _snapshot(net: Network):
    return [t.values.copy() for t in net.params() + net.buffers()]


def _restore(net: Network, snap) -> None:
    for t, v in zip(net.params() + net.buffers(), snap):
        t.values = v.copy()


def train_recognizer(config: RecognizerConfig, protocol: TrainProtocol, sequences, annotations,
                     on_epoch=None) -> Recognizer:
    """Train on all but ``validation_sequences`` randomly withheld sequences.

    Inputs are z-scored with training-frame statistics; the returned network is
    the epoch with the best macro frame F1 on the withheld sequences.
    """
    sequences = list(sequences)
    if len(sequences) < protocol.validation_sequences + 1:
        raise ValueError(f"need at least {protocol.validation_sequences + 1} sequences, got {len(sequences)}")
    rng = np.random.default_rng(protocol.seed)
    order = rng.permutation(len(sequences))
    val = [sequences[i] for i in order[: protocol.validation_sequences]]
    train = [sequences[i] for i in sorted(order[protocol.validation_sequences :])]

    by_seq = {}
    for s in annotations:
        by_seq.setdefault(s.sequence_id, []).append(s)

    def labels_of(seq):
        return spans_to_labels(by_seq.get(seq.id, []), len(seq))

    raw = [frame_features(s, config.recipe) for s in train]
    stats = FeatureStats.fit(np.concatenate(raw))
    train_y = [labels_of(s) for s in train]

    def make_chunks(features):
        return [c for x, y in zip(features, train_y) for c in _chunks(stats.apply(x), y, protocol.max_chunk)]

    chunks = make_chunks(raw)
    val_x = [stats.apply(frame_features(s, config.recipe)) for s in val]
    val_y = np.concatenate([labels_of(s) for s in val])

    net = build_network(config, raw[0].shape[1])
    opt = Adam(net.params(), lr=protocol.lr)
    rec = Recognizer(config, net, stats, tuple(s.id for s in train))
    best_f1, best_snap, best_epoch = -1.0, _snapshot(net), -1
    for epoch in range(protocol.epochs):
        if protocol.jitter_mm > 0:
            noisy = [sequence_vectors(s.positions + rng.normal(0.0, protocol.jitter_mm, s.positions.shape),
                                      config.recipe, s.rotations) for s in train]
            chunks = make_chunks(noisy)
        losses = []
        for b in range(0, len(chunks), protocol.batch):
            pick = rng.permutation(len(chunks)) if b == 0 else pick
            batch = [chunks[i] for i in pick[b : b + protocol.batch]]
            losses.append(train_step(net, [c[0] for c in batch], [c[1] for c in batch], opt, gamma=config.gamma))
        pred = np.concatenate([argmax_non_first(net.predict_proba(x)) for x in val_x])
        f1 = macro_f1(val_y, pred)
        rec.history.append((epoch, float(np.mean(losses)), f1))
        log.info("epoch %d loss %.4f val F1 %.4f", epoch, np.mean(losses), f1)
        if on_epoch is not None:
            on_epoch(epoch, float(np.mean(losses)), f1)
        if f1 > best_f1:
            best_f1, best_snap, best_epoch = f1, _snapshot(net), epoch
        elif protocol.patience is not None and epoch - best_epoch >= protocol.patience:
            break
    _restore(net, best_snap)
    return rec


def train_ensemble(config: RecognizerConfig, protocol: TrainProtocol, sequences, annotations, n_members: int,
                   subset_fraction: float = 0.8) -> list[Recognizer]:
    """Members trained on seeded random subsets; each records its partition."""
    sequences = list(sequences)
    members = []
    for i in range(n_members):
        rng = np.random.default_rng([protocol.seed, i])
        k = max(protocol.validation_sequences + 1, int(round(subset_fraction * len(sequences))))
        subset = [sequences[j] for j in sorted(rng.choice(len(sequences), size=k, replace=False))]
        members.append(train_recognizer(replace(config, seed=config.seed + i),
                                        replace(protocol, seed=protocol.seed + i), subset, annotations))
    return members


BUNDLE_MAGIC = "recognizer-bundle 1"


def _fmt_array(a) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(a))


def save_bundle(rec: Recognizer, path) -> None:
    c = rec.config
    lines = [
        BUNDLE_MAGIC,
        f"config kind={c.kind} recipe={c.recipe} widths={','.join(map(str, c.widths))} gamma={c.gamma!r} "
        f"seed={c.seed} shift_distance={c.shift_distance} shift_fraction={c.shift_fraction!r}",
        "partition " + ",".join(rec.partition),
        "mean " + _fmt_array(rec.stats.mean),
        "std " + _fmt_array(rec.stats.std),
    ]
    lines += network_lines(rec.net)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_bundle(path) -> Recognizer:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != BUNDLE_MAGIC:
        raise ValueError(f"{path}: not a recognizer bundle")
    cfg = dict(p.split("=", 1) for p in lines[1].split()[1:])
    config = RecognizerConfig(
        kind=cfg["kind"], recipe=cfg["recipe"], widths=tuple(int(w) for w in cfg["widths"].split(",")),
        gamma=float(cfg["gamma"]), seed=int(cfg["seed"]), shift_distance=int(cfg["shift_distance"]),
        shift_fraction=float(cfg["shift_fraction"]),
    )
    part = lines[2].split(" ", 1)
    partition = tuple(p for p in part[1].split(",") if p) if len(part) > 1 else ()
    mean = np.array([float(v) for v in lines[3].split()[1:]])
    std = np.array([float(v) for v in lines[4].split()[1:]])
    net, _ = parse_network(lines[5:])
    return Recognizer(config, net, FeatureStats(mean, std), partition)
