"""
Motion energy candidates and trajectory histograms
==================================================

Find candidate segments at peaks of motion energy, classify them with a
recognizer, refine trajectory gestures with orientation histograms and
tune the confidence thresholds by grid search.
"""

import numpy as np

from gesturestream.energy import energy_profile, find_candidates
from gesturestream.metrics import summary_table
from gesturestream.pipelines import build_templates, energy_factory, evaluate_detector, grid_search
from gesturestream.recognizers import RecognizerConfig, TrainProtocol, train_recognizer
from gesturestream.synth import SynthConfig, synth_generate
from gesturestream.trajectory import trajectory_descriptor

train = synth_generate(SynthConfig(n_sequences=30, seed=100, prefix="train"))
val = synth_generate(SynthConfig(n_sequences=6, seed=150, prefix="val"))
test = synth_generate(SynthConfig(n_sequences=10, seed=200, prefix="test"))

# Energy of 40-frame windows every 10 frames; candidates sit where it peaks.
seq = test[0][0]
profile = energy_profile(seq.positions)
_, candidates = find_candidates(seq)
print("window energy (first 12):", np.round(profile.energy[:12], 3))
print("candidate bursts:", [(c.burst_start, c.burst_end) for c in candidates])
print("truth:", [(s.start_frame, s.end_frame) for s in test[1] if s.sequence_id == seq.id])

# Orientation histograms of the index fingertip path, one template per trajectory class.
templates = build_templates(*train)
for label, hist in templates.items():
    print(f"{label.name:<7}", " ".join(f"{v:.2f}" for v in hist))
span = next(s for s in train[1] if s.label in templates)
path = next(q for q in train[0] if q.id == span.sequence_id).positions[span.start_frame : span.end_frame + 1]
print("nearest template for a", span.label.name, "->", templates.nearest(trajectory_descriptor(path))[0].name)

rec = train_recognizer(RecognizerConfig(kind="tsgr", widths=(48, 48, 48)), TrainProtocol(lr=2e-3, epochs=10), *train)
make = energy_factory([rec], templates)
result = grid_search(make, {"alpha": [0.5, 0.8], "beta": [0.1, 0.3, 0.5]}, *val)
for params, score in result.table:
    print(params, round(score, 3))
print("best:", result.best)

report, _ = evaluate_detector(make(**result.best), *test)
print(summary_table({"energy": report}))
