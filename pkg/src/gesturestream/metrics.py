"""Contest scoring: Jaccard index, detection rate and false-positive rate."""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import GESTURES, AnnotationSpan, GestureClass

MATCH_IOU = 0.5


def rasterize(spans, n_frames: int, label: GestureClass) -> np.ndarray:
    """Binary occupancy of ``label`` over a sequence's frames."""
    v = np.zeros(n_frames, dtype=bool)
    for s in spans:
        if s.label == label:
            s.check_within(n_frames)
            v[s.start_frame : s.end_frame + 1] = True
    return v


def jaccard_index(gt, pred, n_frames: int, label: GestureClass) -> float:
    """|GT & P| / |GT | P| over frames; 1.0 when the class is absent from both."""
    g = rasterize(gt, n_frames, label)
    p = rasterize(pred, n_frames, label)
    union = np.count_nonzero(g | p)
    if union == 0:
        return 1.0
    return np.count_nonzero(g & p) / union


def span_iou(a: AnnotationSpan, b: AnnotationSpan) -> float:
    inter = min(a.end_frame, b.end_frame) - max(a.start_frame, b.start_frame) + 1
    if inter <= 0:
        return 0.0
    return inter / (a.length + b.length - inter)


def greedy_match(gt, pred) -> list[tuple[int, int]]:
    """One-to-one matching in temporal order.

    Predictions are visited by start frame; each takes the earliest unmatched
    ground-truth span of the same class with IoU strictly above 0.5.
    Returns ``(gt_index, pred_index)`` pairs.
    """
    gt_order = sorted(range(len(gt)), key=lambda i: (gt[i].start_frame, gt[i].end_frame))
    taken = set()
    pairs = []
    for j in sorted(range(len(pred)), key=lambda j: (pred[j].start_frame, pred[j].end_frame)):
        for i in gt_order:
            if i in taken or gt[i].label != pred[j].label or gt[i].sequence_id != pred[j].sequence_id:
                continue
            if span_iou(gt[i], pred[j]) > MATCH_IOU:
                taken.add(i)
                pairs.append((i, j))
                break
    return pairs


def optimal_match_count(gt, pred) -> int:
    """Maximum one-to-one match count by exhaustive search (small inputs only)."""
    if len(gt) > 5 or len(pred) > 5:
        raise ValueError("exhaustive matching is limited to 5 spans per side")
    ok = [[g.label == p.label and g.sequence_id == p.sequence_id and span_iou(g, p) > MATCH_IOU for p in pred]
          for g in gt]
    best = 0
    slots = list(range(len(pred))) + [None] * len(gt)
    for assign in itertools.permutations(slots, len(gt)):
        best = max(best, sum(1 for i, j in enumerate(assign) if j is not None and ok[i][j]))
    return best


@dataclass
class ClassMetrics:
    label: str
    jaccard: float
    det_rate: float
    fp_rate: float
    gt_count: int
    matched: int
    unmatched_pred: int


@dataclass
class MetricsReport:
    per_class: dict = field(default_factory=dict)  # class name -> ClassMetrics
    jaccard: float = 0.0
    det_rate: float = 0.0
    fp_rate: float = 0.0
    gt_count: int = 0
    matched: int = 0
    unmatched_pred: int = 0
    total_seconds: float | None = None
    classification_seconds: float | None = None

    def summary(self) -> str:
        return f"det_rate={self.det_rate:.4f} fp_rate={self.fp_rate:.4f} jaccard={self.jaccard:.4f}"


def _lengths(sequences) -> dict:
    if isinstance(sequences, dict):
        return dict(sequences)
    return {s.id: len(s) for s in sequences}


def match_and_score(gt, pred, sequences) -> MetricsReport:
    lengths = _lengths(sequences)
    for s in list(gt) + list(pred):
        if s.sequence_id not in lengths:
            raise ValueError(f"span references unknown sequence {s.sequence_id!r}")
        s.check_within(lengths[s.sequence_id])

    by_seq_gt, by_seq_pred = {}, {}
    for s in gt:
        by_seq_gt.setdefault(s.sequence_id, []).append(s)
    for s in pred:
        by_seq_pred.setdefault(s.sequence_id, []).append(s)

    counts = {c: [0, 0, 0] for c in GESTURES}  # gt, matched, unmatched pred
    class_ji = {c: [] for c in GESTURES}
    seq_ji = []
    for seq_id in sorted(lengths):
        g = by_seq_gt.get(seq_id, [])
        p = by_seq_pred.get(seq_id, [])
        pairs = greedy_match(g, p)
        matched_pred = {j for _, j in pairs}
        for s in g:
            counts[s.label][0] += 1
        for i, _ in pairs:
            counts[g[i].label][1] += 1
        for j, s in enumerate(p):
            if j not in matched_pred:
                counts[s.label][2] += 1
        present = sorted({s.label for s in g} | {s.label for s in p})
        values = []
        for c in present:
            ji = jaccard_index(g, p, lengths[seq_id], c)
            class_ji[c].append(ji)
            values.append(ji)
        if values:
            seq_ji.append(float(np.mean(values)))

    report = MetricsReport()
    for c in GESTURES:
        n_gt, n_match, n_fp = counts[c]
        report.per_class[c.name] = ClassMetrics(
            label=c.name,
            jaccard=float(np.mean(class_ji[c])) if class_ji[c] else math.nan,
            det_rate=n_match / n_gt if n_gt else math.nan,
            fp_rate=n_fp / n_gt if n_gt else math.nan,
            gt_count=n_gt,
            matched=n_match,
            unmatched_pred=n_fp,
        )
    rows = [m for m in report.per_class.values() if m.gt_count > 0]
    report.det_rate = float(np.mean([m.det_rate for m in rows])) if rows else math.nan
    report.fp_rate = float(np.mean([m.fp_rate for m in rows])) if rows else math.nan
    report.jaccard = float(np.mean(seq_ji)) if seq_ji else math.nan
    report.gt_count = sum(c[0] for c in counts.values())
    report.matched = sum(c[1] for c in counts.values())
    report.unmatched_pred = sum(c[2] for c in counts.values())
    return report


CSV_COLUMNS = ("class", "jaccard", "det_rate", "fp_rate", "gt_count", "matched", "unmatched_pred")


def report_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for m in report.per_class.values():
        writer.writerow([m.label, m.jaccard, m.det_rate, m.fp_rate, m.gt_count, m.matched, m.unmatched_pred])
    writer.writerow(["MEAN", report.jaccard, report.det_rate, report.fp_rate, report.gt_count, report.matched,
                     report.unmatched_pred])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    return v


def report_json(reports) -> str:
    """JSON for one report or a ``{run_name: report}`` mapping."""
    if isinstance(reports, MetricsReport):
        reports = {"run": reports}
    out = {}
    for name, r in reports.items():
        out[name] = {
            "per_class": {k: _json_safe(asdict(m)) for k, m in r.per_class.items()},
            "aggregate": _json_safe({
                "jaccard": r.jaccard, "det_rate": r.det_rate, "fp_rate": r.fp_rate,
                "gt_count": r.gt_count, "matched": r.matched, "unmatched_pred": r.unmatched_pred,
            }),
            "timing": _json_safe({"total_seconds": r.total_seconds,
                                  "classification_seconds": r.classification_seconds}),
        }
    return json.dumps(out, indent=2)


def write_report(reports, csv_path, json_path=None) -> None:
    """Write per-class CSV (first run when several) and the JSON mirror."""
    if isinstance(reports, MetricsReport):
        reports = {"run": reports}
    first = next(iter(reports.values()))
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(report_csv(first))
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(report_json(reports))


def summary_table(reports) -> str:
    """Table-1 style one line per run."""
    lines = [f"{'run':<24}{'Det. Rate':>10}{'FP Rate':>10}{'Jac. Ind.':>10}{'Tot.Time(s)':>13}{'Class.Time(s)':>15}"]
    for name, r in reports.items():
        tot = "" if r.total_seconds is None else f"{r.total_seconds:.3f}"
        cls = "" if r.classification_seconds is None else f"{r.classification_seconds:.2e}"
        lines.append(f"{name:<24}{r.det_rate:>10.4f}{r.fp_rate:>10.4f}{r.jaccard:>10.4f}{tot:>13}{cls:>15}")
    return "\n".join(lines)
