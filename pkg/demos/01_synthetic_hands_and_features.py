"""
Synthetic hands and frame features
==================================

Generate a few annotated hand streams, then look at what the feature
functions make of one gesture.
"""

import numpy as np

from gesturestream import GestureKind, JointId
from gesturestream.features import articulation_distances, compute_kinematics, hand_size, sequence_vectors
from gesturestream.synth import SynthConfig, synth_generate

# Five sequences of four gestures each, 50 frames per second; every class appears at least once.
sequences, spans = synth_generate(SynthConfig(n_sequences=5, seed=1))
for seq in sequences:
    own = [s for s in spans if s.sequence_id == seq.id]
    print(seq.id, len(seq), "frames:", ", ".join(f"{s.label.name}[{s.start_frame}-{s.end_frame}]" for s in own))

# Pick the first finger-articulation gesture and crop it.
span = next(s for s in spans if s.label.kind is GestureKind.FINE_DYNAMIC)
seq = next(q for q in sequences if q.id == span.sequence_id)
window = seq.positions[span.start_frame : span.end_frame + 1]
print(f"\n{span.label.name}: {len(window)} frames, hand size {hand_size(window):.1f} mm")

# Speed and acceleration are backward differences.
speed, accel = compute_kinematics(window)
tip_speed = np.linalg.norm(speed[:, JointId.INDEX_END], axis=1)
print("index tip speed (mm/frame): peak", tip_speed.max().round(2), "mean", tip_speed.mean().round(2))

# Nine articulation traces: 4 neighbouring fingertip gaps, 5 tip-to-palm distances.
traces = articulation_distances(window)
print("thumb-index gap: start", traces[0, 0].round(1), "min", traces[0].min().round(1), "end", traces[0, -1].round(1))

# The recognizers read 180 values per frame: positions, speeds, accelerations.
rows = sequence_vectors(seq.positions, "pos_speed_accel")
print("frame feature matrix:", rows.shape)

# Idle stretches are much calmer than gestures.
inside = np.zeros(len(seq), dtype=bool)
for s in spans:
    if s.sequence_id == seq.id:
        inside[s.start_frame : s.end_frame + 1] = True
v = np.linalg.norm(compute_kinematics(seq.positions)[0][:, JointId.INDEX_END], axis=1)
print(f"mean tip speed inside gestures {v[inside].mean():.2f}, outside {v[~inside].mean():.2f}")
