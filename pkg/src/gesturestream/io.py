"""Text formats for skeleton sequences and span lists.

Sequence file ``<id>.skel``::

    frames=<n>;rate=<hz>;joints=20;quat=<0|1>
    t_ms;x0;y0;z0[;qw0;qx0;qy0;qz0];x1;...

Span file, one span per line, shared by ground truth and detections::

    sequence_id;LABEL;start_frame;end_frame
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .core import N_JOINTS, AnnotationSpan, GestureClass, SkeletonSequence

SEQUENCE_SUFFIX = ".skel"


class FormatError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips the double exactly
    return repr(float(x))


def save_sequence(seq: SkeletonSequence, path) -> None:
    quat = seq.has_rotations
    lines = [f"frames={len(seq)};rate={_fmt(seq.frame_rate_hz)};joints={N_JOINTS};quat={int(quat)}"]
    for i in range(len(seq)):
        if quat:
            per_joint = np.concatenate([seq.positions[i], seq.rotations[i]], axis=1)
        else:
            per_joint = seq.positions[i]
        lines.append(";".join([_fmt(seq.timestamps[i])] + [_fmt(v) for v in per_joint.ravel()]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(path, text: str) -> dict:
    fields = {}
    for item in text.strip().split(";"):
        key, sep, value = item.partition("=")
        if not sep:
            raise FormatError(path, 1, f"malformed header field {item!r}")
        fields[key.strip()] = value.strip()
    missing = {"frames", "rate", "joints", "quat"} - fields.keys()
    if missing:
        raise FormatError(path, 1, f"header missing {sorted(missing)}")
    try:
        header = {
            "frames": int(fields["frames"]),
            "rate": float(fields["rate"]),
            "joints": int(fields["joints"]),
            "quat": int(fields["quat"]),
        }
    except ValueError as exc:
        raise FormatError(path, 1, f"bad header value: {exc}") from None
    if header["joints"] != N_JOINTS:
        raise FormatError(path, 1, f"expected joints={N_JOINTS}, got {header['joints']}")
    if header["quat"] not in (0, 1):
        raise FormatError(path, 1, "quat must be 0 or 1")
    return header


def load_sequence(path, sequence_id: str | None = None) -> SkeletonSequence:
    path = Path(path)
    sequence_id = sequence_id or path.stem
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise FormatError(path, 1, "empty sequence file")
    header = _parse_header(path, lines[0])
    per_joint = 7 if header["quat"] else 3
    n_values = 1 + N_JOINTS * per_joint

    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(";")
        if len(parts) != n_values:
            raise FormatError(path, line_no, f"expected {n_values} fields, got {len(parts)}")
        try:
            row = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(path, line_no, str(exc)) from None
        if not np.all(np.isfinite(row)):
            raise FormatError(path, line_no, "non-finite value")
        if rows and row[0] <= rows[-1][0]:
            raise FormatError(path, line_no, "timestamps must be strictly increasing")
        rows.append(row)
    if len(rows) != header["frames"]:
        raise FormatError(path, len(lines), f"header declares {header['frames']} frames, found {len(rows)}")
    if not rows:
        raise FormatError(path, 1, "sequence has no frames")

    data = np.array(rows)
    joints = data[:, 1:].reshape(len(rows), N_JOINTS, per_joint)
    rotations = joints[:, :, 3:] if header["quat"] else None
    return SkeletonSequence(sequence_id, joints[:, :, :3], data[:, 0], header["rate"], rotations)


def write_spans(spans: Iterable[AnnotationSpan], path) -> None:
    text = "".join(f"{s.sequence_id};{s.label.name};{s.start_frame};{s.end_frame}\n" for s in spans)
    Path(path).write_text(text, encoding="utf-8")


def read_spans(path, sequence_lengths: dict[str, int] | None = None) -> list[AnnotationSpan]:
    """Parse a span file; with ``sequence_lengths`` also check ids and frame ranges."""
    spans = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 4:
            raise FormatError(path, line_no, f"expected 4 fields, got {len(parts)}")
        try:
            span = AnnotationSpan(parts[0], GestureClass.parse(parts[1]), int(parts[2]), int(parts[3]))
        except ValueError as exc:
            raise FormatError(path, line_no, str(exc)) from None
        if sequence_lengths is not None:
            if span.sequence_id not in sequence_lengths:
                raise FormatError(path, line_no, f"unknown sequence {span.sequence_id!r}")
            if span.end_frame >= sequence_lengths[span.sequence_id]:
                raise FormatError(
                    path, line_no,
                    f"end frame {span.end_frame} outside sequence of {sequence_lengths[span.sequence_id]} frames",
                )
        spans.append(span)
    return spans


# Readers for other on-disk formats map a file onto a SkeletonSequence.
_READERS: dict[str, Callable[[Path], SkeletonSequence]] = {SEQUENCE_SUFFIX: load_sequence}


def register_reader(suffix: str, reader: Callable[[Path], SkeletonSequence]) -> None:
    _READERS[suffix] = reader


def load_sequences(sequence_dir) -> list[SkeletonSequence]:
    """Every file with a registered suffix, in name order."""
    sequence_dir = Path(sequence_dir)
    sequences = []
    for name in sorted(os.listdir(sequence_dir)):
        reader = _READERS.get(Path(name).suffix)
        if reader is not None:
            sequences.append(reader(sequence_dir / name))
    return sequences


def load_dataset(sequence_dir, annotation_file) -> tuple[list[SkeletonSequence], list[AnnotationSpan]]:
    sequences = load_sequences(sequence_dir)
    lengths = {s.id: len(s) for s in sequences}
    if len(lengths) != len(sequences):
        raise ValueError(f"duplicate sequence ids in {sequence_dir}")
    spans = read_spans(annotation_file, lengths)
    return sequences, spans


def save_dataset(sequences, spans, sequence_dir, annotation_file) -> None:
    sequence_dir = Path(sequence_dir)
    sequence_dir.mkdir(parents=True, exist_ok=True)
    for seq in sequences:
        save_sequence(seq, sequence_dir / f"{seq.id}{SEQUENCE_SUFFIX}")
    write_spans(spans, annotation_file)
