"""
Per-frame recognizers and the four-state detector
=================================================

Train a small shift-node network, label every frame, then turn the labels
into events two ways: raw label runs and the state machine. A GRU stack is
trained alongside for comparison. Takes under a minute.
"""

import numpy as np

from gesturestream.fsm import FsmConfig, trace
from gesturestream.metrics import summary_table
from gesturestream.pipelines import FrameLabelDetector, evaluate_detector
from gesturestream.recognizers import RecognizerConfig, TrainProtocol, train_recognizer
from gesturestream.synth import SynthConfig, synth_generate

train = synth_generate(SynthConfig(n_sequences=30, seed=100, prefix="train"))
test = synth_generate(SynthConfig(n_sequences=10, seed=200, prefix="test"))

protocol = TrainProtocol(lr=2e-3, epochs=10, seed=0)
tsgr = train_recognizer(RecognizerConfig(kind="tsgr", widths=(48, 48, 48)), protocol, *train,
                        on_epoch=lambda e, loss, f1: print(f"tsgr epoch {e}: loss {loss:.3f} val F1 {f1:.3f}"))
gru = train_recognizer(RecognizerConfig(kind="udeepgru", widths=(48, 48, 32)), protocol, *train)

# Labels are causal: cutting the stream does not change earlier frames.
seq = test[0][0]
labels, probs = tsgr.predict_stream(seq)
print("frames labelled as gestures:", int(np.count_nonzero(labels != 18)), "of", len(seq))

states = trace(labels)
changes = [(t + 9, s.name) for t, (a, s) in enumerate(zip([None] + states, states)) if a is not s]
print("state changes:", changes[:8])

reports = {}
for name, det in {
    "tsgr+argmax": FrameLabelDetector([tsgr]),
    "tsgr+fsm": FrameLabelDetector([tsgr], FsmConfig()),
    "udeepgru+fsm": FrameLabelDetector([gru], FsmConfig()),
}.items():
    reports[name], _ = evaluate_detector(det, *test)
print()
print(summary_table(reports))
