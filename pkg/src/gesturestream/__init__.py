"""Online hand-gesture detection from streams of 20-joint hand skeletons."""

from .core import (
    AnnotationSpan,
    DetectionEvent,
    GestureClass,
    GestureKind,
    HandFrame,
    JointId,
    SkeletonSequence,
    crop_window,
    labels_to_spans,
    resample_sequence,
    spans_to_labels,
)
from .io import load_dataset, load_sequences, read_spans, save_dataset, write_spans
from .metrics import MetricsReport, jaccard_index, match_and_score

__all__ = [
    "AnnotationSpan",
    "DetectionEvent",
    "GestureClass",
    "GestureKind",
    "HandFrame",
    "JointId",
    "MetricsReport",
    "SkeletonSequence",
    "crop_window",
    "jaccard_index",
    "labels_to_spans",
    "load_dataset",
    "load_sequences",
    "match_and_score",
    "read_spans",
    "resample_sequence",
    "save_dataset",
    "spans_to_labels",
    "write_spans",
]

__version__ = "0.1.0"
