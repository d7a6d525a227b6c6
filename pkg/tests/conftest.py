import numpy as np
import pytest

from gesturestream.core import N_JOINTS, SkeletonSequence
from gesturestream.recognizers import RecognizerConfig, TrainProtocol, train_recognizer
from gesturestream.synth import SynthConfig, synth_generate


def make_sequence(positions, seq_id="s", rate=50.0, rotations=None):
    positions = np.asarray(positions, dtype=float)
    return SkeletonSequence(seq_id, positions, np.arange(len(positions)) * 1000.0 / rate, rate, rotations)


def random_sequence(n_frames, seed=0, seq_id="s"):
    rng = np.random.default_rng(seed)
    return make_sequence(rng.normal(0, 50, size=(n_frames, N_JOINTS, 3)), seq_id)


@pytest.fixture(scope="session")
def small_dataset():
    return synth_generate(SynthConfig(n_sequences=10, seed=11, prefix="small"))


@pytest.fixture(scope="session")
def tiny_recognizers(small_dataset):
    """One small, briefly trained network of each kind."""
    seqs, spans = small_dataset
    protocol = TrainProtocol(lr=2e-3, epochs=2, seed=0)
    return {
        kind: train_recognizer(RecognizerConfig(kind=kind, widths=widths, seed=1), protocol, seqs, spans)
        for kind, widths in (("udeepgru", (16, 16, 12)), ("tsgr", (16, 16, 16)))
    }


@pytest.fixture(scope="session")
def baseline_setup():
    from gesturestream.pipelines import BaselineDetector

    seqs, spans = synth_generate(SynthConfig(n_sequences=20, seed=21, prefix="bl"))
    return seqs, spans, BaselineDetector.train(seqs, spans, seed=0)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def record_acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; all lines are repeated in the terminal summary."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"{criterion}: {'PASS' if passed else 'FAIL'} ({detail})"
        request.config._acceptance_lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
