"""Acceptance criteria, one test and one PASS/FAIL line each.

Run ``pytest tests/test_acceptance.py -v`` and read the "acceptance criteria"
section at the end of the output.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from gesturestream.core import AnnotationSpan, GestureClass, SkeletonSequence
from gesturestream.energy import find_candidates
from gesturestream.fsm import FsmConfig, State, fsm_run, trace
from gesturestream.io import load_dataset
from gesturestream.metrics import match_and_score, span_iou
from gesturestream.pipelines import BaselineDetector, FrameLabelDetector, evaluate_detector
from gesturestream.recognizers import RecognizerConfig, TrainProtocol, train_recognizer
from gesturestream.seqnet import GruCellParams, focal_loss, gru_cell_forward, temporal_shift
from gesturestream.seqnet.gradcheck import run_standard_checks
from gesturestream.synth import SynthConfig, synth_generate, synth_trajectory
from gesturestream.trajectory import TRAJECTORY_CLASSES, ClassTemplates, trajectory_descriptor

from oracles import METRIC_CASES, check_metric_case, greedy_equals_optimal

NON = int(GestureClass.NON_GESTURE)


def test_c1_metric_oracles(record_acceptance):
    t0 = time.perf_counter()
    bad = [m for case in METRIC_CASES for m in check_metric_case(case, match_and_score)]
    mismatches, total = greedy_equals_optimal(n_frames=3, max_spans=3)
    seconds = time.perf_counter() - t0
    ok = not bad and mismatches == 0 and len(METRIC_CASES) >= 10 and seconds < 1.0
    assert record_acceptance(
        "C1 metric oracle suite", ok,
        f"{len(METRIC_CASES)} hand-counted cases, {len(bad)} mismatches; greedy vs brute force "
        f"{total - mismatches}/{total} enumerated cases; {seconds:.2f} s"), bad


def test_c2_gradient_verification(record_acceptance):
    t0 = time.perf_counter()
    results = run_standard_checks(seed=0, instances=4, step=1e-4)
    seconds = time.perf_counter() - t0
    worst = max(r.max_rel_error for _, _, r in results)
    instances = len({name for name, _, _ in results})
    kinds = sorted({name.split("#")[0] for name, _, _ in results})
    ok = worst < 1e-4 and instances >= 20 and seconds < 30
    assert record_acceptance("C2 gradient verification", ok,
                             f"{instances} instances over {', '.join(kinds)}; worst relative error {worst:.2e}; "
                             f"{seconds:.1f} s")


def _sig(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_c3_reference_math(record_acceptance):
    rng = np.random.default_rng(3)
    names = ("W_xr", "W_hr", "W_xu", "W_hu", "W_xc", "W_hc", "b_xr", "b_hr", "b_xu", "b_hu", "b_xc", "b_hc")
    gru_err = 0.0
    for _ in range(200):
        w = dict(zip(names, rng.normal(size=12)))
        x, h0 = rng.normal(size=2)
        p = GruCellParams(**{k: np.array([[v]]) if k[0] == "W" else np.array([v]) for k, v in w.items()})
        r = _sig(w["W_xr"] * x + w["b_xr"] + w["W_hr"] * h0 + w["b_hr"])
        u = _sig(w["W_xu"] * x + w["b_xu"] + w["W_hu"] * h0 + w["b_hu"])
        c = math.tanh(w["W_xc"] * x + w["b_xc"] + r * (w["W_hc"] * h0 + w["b_hc"]))
        h, _ = gru_cell_forward(p, np.array([x]), np.array([h0]))
        gru_err = max(gru_err, abs(h[0] - (u * h0 + (1 - u) * c)))

    focal_err = 0.0
    for _ in range(1000):
        probs = rng.dirichlet(np.ones(int(rng.integers(2, 20))))
        k = int(rng.integers(len(probs)))
        focal_err = max(focal_err, abs(focal_loss(probs, k, gamma=0.0) + math.log(probs[k])))

    shift_exact, shift_causal = True, True
    for trial in range(50):
        T, d = int(rng.integers(1, 30)), int(rng.integers(1, 10))
        x = rng.normal(size=(T, d))
        out = temporal_shift(x, 5, 0.5)
        k = d // 2
        want = x.copy()
        want[:, :k] = 0.0
        want[5:, :k] = x[: max(T - 5, 0), :k]
        shift_exact &= np.array_equal(out, want)
        cut = int(rng.integers(0, T))
        mutated = x.copy()
        mutated[cut + 1 :] = rng.normal(size=mutated[cut + 1 :].shape)
        shift_causal &= np.array_equal(temporal_shift(mutated)[: cut + 1], out[: cut + 1])

    ok = gru_err <= 1e-12 and focal_err <= 1e-12 and shift_exact and shift_causal
    assert record_acceptance("C3 reference math", ok,
                             f"GRU max error {gru_err:.1e} over 200 cells; focal(gamma=0) vs CE max error "
                             f"{focal_err:.1e} over 1000 distributions; shift bit-exact={shift_exact}, "
                             f"future-mutation invariant={shift_causal}")


def _random_stream(rng, n):
    pos = np.cumsum(rng.normal(0, 3, size=(n, 20, 3)), axis=0) + rng.normal(0, 50, size=(1, 20, 3))
    q = rng.normal(size=(n, 20, 4))
    q /= np.linalg.norm(q, axis=2, keepdims=True)
    return SkeletonSequence("r", pos, np.arange(n) * 20.0, 50.0, q)


def test_c4_recognizer_causality(record_acceptance, tiny_recognizers):
    rng = np.random.default_rng(4)
    worst, label_changes = 0.0, 0
    for kind, rec in tiny_recognizers.items():
        for _ in range(100):
            seq = _random_stream(rng, int(rng.integers(20, 120)))
            T = int(rng.integers(1, len(seq)))
            cut = SkeletonSequence(seq.id, seq.positions[:T], seq.timestamps[:T], 50.0, seq.rotations[:T])
            full_labels, full = rec.predict_stream(seq)
            part_labels, part = rec.predict_stream(cut)
            worst = max(worst, float(np.abs(full[:T] - part).max()))
            label_changes += int(np.count_nonzero(full_labels[:T] != part_labels))
    ok = worst <= 1e-12 and label_changes == 0
    assert record_acceptance("C4 recognizer causality", ok,
                             f"uDeepGRU and TSGR, 100 truncation trials each; {label_changes} label changes, "
                             f"max probability change {worst:.1e}")


@pytest.fixture(scope="module")
def benchmark():
    train = synth_generate(SynthConfig(n_sequences=40, gestures_per_sequence=(4,), seed=100, prefix="train"))
    test = synth_generate(SynthConfig(n_sequences=40, gestures_per_sequence=(4,), seed=200, prefix="test"))
    return train, test


def test_c5_synthetic_end_to_end(record_acceptance, benchmark):
    (train_seqs, train_spans), (test_seqs, test_spans) = benchmark
    t0 = time.perf_counter()
    baseline = BaselineDetector.train(train_seqs, train_spans, seed=0)
    base_report, _ = evaluate_detector(baseline, test_seqs, test_spans)

    # smaller and faster-learning than the library defaults to fit the time budget
    rec = train_recognizer(RecognizerConfig(kind="tsgr", widths=(64, 64, 64, 64), seed=0),
                           TrainProtocol(lr=2e-3, epochs=15, seed=0), train_seqs, train_spans)
    fsm_report, _ = evaluate_detector(FrameLabelDetector([rec], FsmConfig()), test_seqs, test_spans)
    seconds = time.perf_counter() - t0

    ok = (base_report.det_rate >= 0.6 and fsm_report.det_rate >= 0.8 and fsm_report.fp_rate <= 0.3
          and base_report.det_rate <= fsm_report.det_rate and seconds < 600)
    assert record_acceptance(
        "C5 synthetic end-to-end", ok,
        f"baseline det {base_report.det_rate:.3f} fp {base_report.fp_rate:.3f} JI {base_report.jaccard:.3f}; "
        f"TSGR+FSM det {fsm_report.det_rate:.3f} fp {fsm_report.fp_rate:.3f} JI {fsm_report.jaccard:.3f}; "
        f"{seconds:.0f} s")


def test_c6_energy_recall(record_acceptance):
    seqs, spans = synth_generate(SynthConfig(n_sequences=40, seed=6, prefix="energy"))
    covered, contained = 0, 0
    for seq in seqs:
        _, candidates = find_candidates(seq)  # unfiltered: alpha=1, beta=0 keeps every candidate
        for g in (s for s in spans if s.sequence_id == seq.id):
            best = max((span_iou(g, AnnotationSpan(seq.id, g.label, c.burst_start, c.burst_end))
                        for c in candidates), default=0.0)
            covered += best > 0.3
            contained += any(c.start <= g.start_frame and c.end >= g.end_frame for c in candidates)
    recall = covered / len(spans)
    assert record_acceptance("C6 energy detector recall", recall >= 0.9,
                             f"{covered}/{len(spans)} gestures with candidate IoU > 0.3 (recall {recall:.3f}); "
                             f"{contained}/{len(spans)} fully inside a 200-frame segment")


def test_c7_trajectory_histograms(record_acceptance):
    def sample(label, rng):
        return Rotation.random(random_state=rng).apply(synth_trajectory(label, rng=rng)) + rng.normal(0, 100, 3)

    rng = np.random.default_rng(70)
    templates = ClassTemplates.build({c: [sample(c, rng) for _ in range(30)] for c in TRAJECTORY_CLASSES})
    rng = np.random.default_rng(71)
    correct = sum(templates.nearest(trajectory_descriptor(sample(c, rng)))[0] == c
                  for c in TRAJECTORY_CLASSES for _ in range(100))
    accuracy = correct / 400

    line = np.arange(60)[:, None] * np.array([2.0, -1.0, 0.5]) + 7.0
    center_mass = trajectory_descriptor(line, 16)[8]
    th = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    circle = np.c_[40 * np.cos(th), 40 * np.sin(th), np.zeros(360)]
    spread = max(float(np.ptp(trajectory_descriptor(circle, n))) for n in (8, 16))

    ok = accuracy >= 0.9 and center_mass > 0.95 and spread < 0.05
    assert record_acceptance("C7 trajectory histograms", ok,
                             f"accuracy {accuracy:.3f} on 400 rotated jittered paths; line center-bin mass "
                             f"{center_mass:.3f}; circle bin spread {spread:.4f}")


def _labels(n, *blocks):
    out = np.full(n, NON)
    for label, a, b in blocks:
        out[a : b + 1] = int(label)
    return out


def test_c8_fsm_fidelity(record_acceptance):
    F, C, T = GestureClass.FOUR, GestureClass.CROSS, GestureClass.TAP
    checks = {}
    states = trace(_labels(170, (F, 50, 109)))
    at = lambda t, buf=10: states[t - buf + 1]
    checks["single-frame trigger"] = at(49) is State.IDLE and at(50) is State.BEGIN_CHECK
    checks["5-of-10 confirmation"] = at(53) is State.BEGIN_CHECK and at(54) is State.IN_GESTURE
    checks["empty-window exit"] = at(118) is State.IN_GESTURE and at(119) is State.END_CHECK
    checks["25-window termination"] = (at(142) is State.END_CHECK and at(143) is State.IDLE
                                       and fsm_run(_labels(170, (F, 50, 109))) == [AnnotationSpan("", F, 50, 109)])
    sparse = trace(_labels(60, *[(C, t, t) for t in (20, 22, 24, 26, 28)]))
    checks["sparse 5-of-10"] = sparse[28 - 9] is State.IN_GESTURE
    too_few = trace(_labels(60, *[(C, t, t) for t in (20, 22, 24, 26)]))
    checks["4-of-10 rejected"] = too_few[29 - 9] is State.IDLE and fsm_run(_labels(60, *[(C, t, t) for t in (20, 22, 24, 26)])) == []
    short = trace(_labels(80, (T, 30, 31)), FsmConfig(buffer_size=4))
    checks["empty buffer before confirmation"] = short[35 - 3] is State.END_CHECK
    checks["gap < 25 windows merges"] = fsm_run(_labels(250, (F, 50, 79), (F, 110, 139))) == [
        AnnotationSpan("", F, 50, 139)]
    stream = _labels(400, (F, 20, 80), (T, 150, 200), (C, 300, 330))
    checks["deterministic"] = fsm_run(stream) == fsm_run(stream)
    failed = [k for k, v in checks.items() if not v]
    assert record_acceptance("C8 FSM fidelity", not failed,
                             f"{len(checks) - len(failed)}/{len(checks)} scripted transitions reproduced"
                             + (f"; failed: {', '.join(failed)}" if failed else "")), failed


REAL_DATA = os.environ.get("GESTURESTREAM_REAL_DATA")


@pytest.mark.skipif(not REAL_DATA, reason="set GESTURESTREAM_REAL_DATA to a directory with train/ and test/")
def test_c9_real_data_baseline(record_acceptance):
    root = Path(REAL_DATA)
    train = load_dataset(root / "train", root / "train" / "annotations.txt")
    test = load_dataset(root / "test", root / "test" / "annotations.txt")
    report, _ = evaluate_detector(BaselineDetector.train(*train, seed=0), *test)
    in_band = abs(report.det_rate - 0.40) <= 0.10
    # reported, not gating
    record_acceptance("C9 real-data baseline (reported)", in_band,
                      f"det {report.det_rate:.4f} fp {report.fp_rate:.4f} JI {report.jaccard:.4f}; "
                      f"target band 0.30-0.50")
