import numpy as np
import pytest

from gesturestream.core import GestureClass, SkeletonSequence, spans_to_labels
from gesturestream.recognizers import (
    Recognizer,
    RecognizerConfig,
    TrainProtocol,
    argmax_non_first,
    build_network,
    ensemble_predict,
    ensemble_probabilities,
    load_bundle,
    macro_f1,
    predict_stream,
    save_bundle,
    train_ensemble,
    train_recognizer,
)
from gesturestream.seqnet import GRU, Dense, ShiftNode
from gesturestream.synth import SynthConfig, synth_generate

NON = int(GestureClass.NON_GESTURE)


def truncated(seq: SkeletonSequence, n: int) -> SkeletonSequence:
    return SkeletonSequence(seq.id, seq.positions[:n], seq.timestamps[:n], seq.frame_rate_hz, seq.rotations[:n])


def test_config_defaults_and_validation():
    assert RecognizerConfig(kind="udeepgru").widths == (128, 128, 128, 64)
    assert RecognizerConfig(kind="tsgr").widths == (128, 128, 128, 128)
    with pytest.raises(ValueError):
        RecognizerConfig(kind="lstm")
    with pytest.raises(ValueError):
        RecognizerConfig(kind="udeepgru", widths=(8,))
    with pytest.raises(ValueError):
        RecognizerConfig(recipe="bogus")
    with pytest.raises(ValueError):
        TrainProtocol(lr=0)


def test_network_shapes():
    net = build_network(RecognizerConfig(kind="udeepgru", widths=(16, 12, 8)), 180)
    assert [type(layer) for layer in net.layers] == [Dense, GRU, GRU, Dense]
    assert net.layers[0].activation == "tanh" and net.in_dim == 180 and net.out_dim == 19
    net = build_network(RecognizerConfig(kind="tsgr", widths=(8, 8, 6)), 60)
    assert [type(layer) for layer in net.layers] == [ShiftNode, ShiftNode, ShiftNode, Dense]
    assert [layer.activation for layer in net.layers[:3]] == ["tanh", "relu", "relu"]
    assert net.layers[0].distance == 5 and net.layers[0].fraction == 0.5


def test_macro_f1():
    assert macro_f1([NON, 1, 1, 2], [NON, 1, 1, 2]) == 1.0
    # class 1: tp 1 fp 0 fn 1 -> 2/3; class 2: tp 0 fp 1 fn 0 -> 0
    assert macro_f1([1, 1, NON], [1, NON, 2]) == pytest.approx(1 / 3)
    assert macro_f1([NON, NON], [NON, NON]) == 1.0


def test_tie_rule():
    probs = np.array([[0.5, 0.5], [0.3, 0.7], [0.4, 0.4]])
    assert argmax_non_first(probs).tolist() == [1, 1, 1]
    p = np.zeros((1, 19))
    p[0, [3, 7]] = 0.5
    assert argmax_non_first(p).tolist() == [3]


def test_ensemble_arithmetic():
    members = [np.array([[0.6, 0.4]]), np.array([[0.2, 0.8]]), np.array([[0.2, 0.8]])]
    mean = ensemble_probabilities(members)
    np.testing.assert_allclose(mean, [[1 / 3, 2 / 3]])
    assert argmax_non_first(mean).tolist() == [1]
    np.testing.assert_array_equal(ensemble_probabilities(members[:1]), members[0])
    with pytest.raises(ValueError):
        ensemble_probabilities([np.zeros((1, 2)), np.zeros((1, 3))])
    with pytest.raises(ValueError):
        ensemble_probabilities([])


def test_identical_members_equal_single(tiny_recognizers, small_dataset):
    rec = tiny_recognizers["tsgr"]
    seq = small_dataset[0][0]
    np.testing.assert_array_equal(ensemble_predict([rec, rec, rec], seq), predict_stream(rec, seq)[0])
    with pytest.raises(ValueError):
        ensemble_predict([], seq)


def test_needs_seven_sequences(small_dataset):
    seqs, spans = small_dataset
    with pytest.raises(ValueError, match="at least 7"):
        train_recognizer(RecognizerConfig(widths=(4,)), TrainProtocol(epochs=1), seqs[:6], spans)


@pytest.mark.parametrize("kind", ["udeepgru", "tsgr"])
def test_returned_checkpoint_is_best_epoch(kind, tiny_recognizers, small_dataset):
    rec = tiny_recognizers[kind]
    seqs, spans = small_dataset
    val = [s for s in seqs if s.id not in rec.partition]
    assert len(val) == 6 and len(rec.partition) == 4
    true = np.concatenate([spans_to_labels([a for a in spans if a.sequence_id == s.id], len(s)) for s in val])
    pred = np.concatenate([rec.predict_stream(s)[0] for s in val])
    assert macro_f1(true, pred) == pytest.approx(max(f for _, _, f in rec.history), abs=1e-12)


@pytest.mark.parametrize("kind", ["udeepgru", "tsgr"])
def test_causal_predictions(kind, tiny_recognizers, small_dataset):
    rec = tiny_recognizers[kind]
    seq = small_dataset[0][1]
    full = rec.predict_proba(seq)
    rng = np.random.default_rng(0)
    for n in rng.integers(1, len(seq), size=10):
        np.testing.assert_allclose(rec.predict_proba(truncated(seq, n)), full[:n], atol=1e-12)


def test_same_seed_same_checkpoint(tmp_path, small_dataset):
    seqs, spans = small_dataset
    cfg, proto = RecognizerConfig(kind="tsgr", widths=(8, 8), seed=2), TrainProtocol(lr=1e-3, epochs=2, seed=3)
    save_bundle(train_recognizer(cfg, proto, seqs, spans), tmp_path / "a.rec")
    save_bundle(train_recognizer(cfg, proto, seqs, spans), tmp_path / "b.rec")
    assert (tmp_path / "a.rec").read_bytes() == (tmp_path / "b.rec").read_bytes()


def test_bundle_round_trip(tmp_path, tiny_recognizers, small_dataset):
    seq = small_dataset[0][2]
    for kind, rec in tiny_recognizers.items():
        rec.save(tmp_path / f"{kind}.rec")
        back = load_bundle(tmp_path / f"{kind}.rec")
        assert isinstance(back, Recognizer) and back.config == rec.config and back.partition == rec.partition
        np.testing.assert_array_equal(back.predict_proba(seq), rec.predict_proba(seq))
    (tmp_path / "bad.rec").write_text("nope\n")
    with pytest.raises(ValueError, match="not a recognizer bundle"):
        load_bundle(tmp_path / "bad.rec")


def test_tsgr_overfits_three_classes():
    seqs, spans = synth_generate(SynthConfig(classes=("LEFT", "FOUR", "PINCH"), gestures_per_sequence=(3,),
                                             n_sequences=10, seed=4))
    rec = train_recognizer(RecognizerConfig(kind="tsgr", widths=(32, 32)), TrainProtocol(lr=3e-3, epochs=20),
                           seqs, spans)
    train = [s for s in seqs if s.id in rec.partition]
    hits = [rec.predict_stream(s)[0] == spans_to_labels([a for a in spans if a.sequence_id == s.id], len(s))
            for s in train]
    assert np.concatenate(hits).mean() >= 0.95


def test_ensemble_members_record_partitions(small_dataset):
    seqs, spans = small_dataset
    members = train_ensemble(RecognizerConfig(kind="tsgr", widths=(4,)), TrainProtocol(epochs=1, seed=1), seqs, spans,
                             n_members=2, subset_fraction=0.8)
    assert len(members) == 2
    assert all(len(m.partition) == 2 for m in members)
    assert members[0].config.seed != members[1].config.seed


def test_early_stop_on_plateau(small_dataset):
    seqs, spans = small_dataset
    # a vanishing learning rate keeps validation F1 flat after the first epoch
    rec = train_recognizer(RecognizerConfig(kind="tsgr", widths=(4,)), TrainProtocol(lr=1e-12, epochs=10, patience=2),
                           seqs, spans)
    assert len(rec.history) == 3
    full = train_recognizer(RecognizerConfig(kind="tsgr", widths=(4,)),
                            TrainProtocol(lr=1e-12, epochs=4, patience=None), seqs, spans)
    assert len(full.history) == 4


def test_jitter_augmentation_is_seeded(small_dataset):
    seqs, spans = small_dataset
    cfg = RecognizerConfig(kind="tsgr", widths=(6,))
    runs = [train_recognizer(cfg, TrainProtocol(lr=1e-2, epochs=2, jitter_mm=j), seqs, spans) for j in (0.0, 2.0, 2.0)]
    plain, noisy, again = (r.history for r in runs)
    assert noisy == again and noisy != plain
    with pytest.raises(ValueError):
        TrainProtocol(jitter_mm=-1.0)
