import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesturestream.core import (
    FINGERTIPS,
    GESTURES,
    N_CLASSES,
    AnnotationSpan,
    GestureClass,
    GestureKind,
    HandFrame,
    JointId,
    crop_window,
    labels_to_spans,
    resample_sequence,
    spans_to_labels,
)

from conftest import make_sequence


def test_joint_enumeration():
    assert len(JointId) == 20
    assert [j.value for j in JointId] == list(range(20))
    assert JointId.PALM == 0 and JointId.INDEX_END == 7 and JointId.PINKY_END == 19
    assert set(FINGERTIPS) == {JointId.THUMB_END, JointId.INDEX_END, JointId.MIDDLE_END, JointId.RING_END,
                               JointId.PINKY_END}


def test_gesture_kinds():
    kinds = {c.name: c.kind for c in GestureClass}
    assert [n for n, k in kinds.items() if k is GestureKind.STATIC] == ["ONE", "TWO", "THREE", "FOUR", "OK", "MENU",
                                                                      "POINTING"]
    assert [n for n, k in kinds.items() if k is GestureKind.COARSE_DYNAMIC] == ["LEFT", "RIGHT", "CIRCLE", "V",
                                                                              "CROSS"]
    assert [n for n, k in kinds.items() if k is GestureKind.FINE_DYNAMIC] == ["GRAB", "PINCH", "TAP", "DENY", "KNOB",
                                                                            "EXPAND"]
    assert GestureClass.NON_GESTURE == 18 and N_CLASSES == 19 and len(GESTURES) == 18


def test_parse_names():
    assert GestureClass.parse("pinch") is GestureClass.PINCH
    assert GestureClass.parse("none") is GestureClass.NON_GESTURE
    with pytest.raises(ValueError, match="unknown gesture class"):
        GestureClass.parse("WAVE")


def test_hand_frame_validation():
    HandFrame(np.zeros((20, 3)), 0.0, np.tile([1.0, 0, 0, 0], (20, 1)))
    with pytest.raises(ValueError):
        HandFrame(np.full((20, 3), np.nan), 0.0)
    with pytest.raises(ValueError, match="unit norm"):
        HandFrame(np.zeros((20, 3)), 0.0, np.tile([1.0, 0.1, 0, 0], (20, 1)))


def test_sequence_rejects_non_increasing_timestamps():
    from gesturestream.core import SkeletonSequence

    with pytest.raises(ValueError, match="strictly increasing"):
        SkeletonSequence("s", np.zeros((3, 20, 3)), [0.0, 10.0, 10.0], 100.0)


def test_sequence_is_read_only():
    seq = make_sequence(np.zeros((4, 20, 3)))
    with pytest.raises(ValueError):
        seq.positions[0, 0, 0] = 1.0


def test_span_invariants():
    s = AnnotationSpan("a", "PINCH", 20, 50)
    assert s.label is GestureClass.PINCH and s.length == 31
    with pytest.raises(ValueError):
        AnnotationSpan("a", GestureClass.NON_GESTURE, 0, 1)
    with pytest.raises(ValueError):
        AnnotationSpan("a", GestureClass.ONE, 5, 4)
    with pytest.raises(ValueError):
        s.check_within(50)


def test_crop_window():
    seq = make_sequence(np.arange(10)[:, None, None] * np.ones((10, 20, 3)))
    np.testing.assert_array_equal(crop_window(seq, 0, 10), seq.positions)
    assert crop_window(seq, 3, 4)[:, 0, 0].tolist() == [3, 4, 5, 6]
    with pytest.raises(IndexError):
        crop_window(seq, 8, 5)


def test_resample_identity_and_linear():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(20, 20, 3))
    np.testing.assert_array_equal(resample_sequence(w, 20), w)
    x = np.arange(39, dtype=float)[:, None, None] * np.ones((39, 20, 3))
    np.testing.assert_allclose(resample_sequence(x, 20)[:, 0, 0], np.arange(0, 39, 2), atol=1e-12)


def test_resample_short_window_oracle():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(7, 20, 3))
    out = resample_sequence(w, 20)
    for k in range(20):
        u = k * 6 / 19
        i = min(int(np.floor(u)), 5)
        f = u - i
        np.testing.assert_allclose(out[k], (1 - f) * w[i] + f * w[i + 1], atol=1e-12)
    np.testing.assert_array_equal(out[0], w[0])
    np.testing.assert_allclose(out[-1], w[-1], atol=1e-12)


def test_resample_rejects_single_frame():
    with pytest.raises(ValueError):
        resample_sequence(np.zeros((1, 20, 3)), 20)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 60), st.floats(0.1, 10), st.floats(-100, 100))
def test_resample_commutes_with_affine_maps(n, scale, shift):
    w = np.random.default_rng(n).normal(size=(n, 20, 3))
    np.testing.assert_allclose(resample_sequence(w * scale + shift, 20), resample_sequence(w, 20) * scale + shift,
                               rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 17), st.integers(1, 15)), max_size=6))
def test_spans_labels_round_trip(blocks):
    # non-adjacent spans separated by at least one non-gesture frame
    spans, t = [], 1
    for label, length in blocks:
        spans.append(AnnotationSpan("s", GestureClass(label), t, t + length - 1))
        t += length + 1
    labels = spans_to_labels(spans, t + 1)
    assert labels_to_spans(labels, "s") == spans
