"""
The dissimilarity baseline
==========================

Build a gesture dictionary, train one linear SVM per class and slide a
window over unseen streams. Takes about a minute.
"""

from gesturestream.baseline import dissimilarity_vector
from gesturestream.metrics import summary_table
from gesturestream.pipelines import BaselineDetector, evaluate_detector
from gesturestream.synth import SynthConfig, synth_generate

train = synth_generate(SynthConfig(n_sequences=30, seed=100, prefix="train"))
test = synth_generate(SynthConfig(n_sequences=10, seed=200, prefix="test"))

detector = BaselineDetector.train(*train, seed=0)
d = detector.dictionary
print(f"dictionary: {len(d.labels)} entries, {int(d.is_representation.sum())} representatives")

# Every query becomes 12 numbers per representative.
query = d.training[0][0]
print("dissimilarity vector length:", dissimilarity_vector(query, d).shape[0])

# Events come from runs of positive SVM margins on a 6-frame grid.
seq = test[0][0]
for event in detector.detect(seq):
    print(f"  {event.label.name:<9} frames {event.start_frame}-{event.end_frame}")
print("truth:", [(s.label.name, s.start_frame, s.end_frame) for s in test[1] if s.sequence_id == seq.id])

report, _ = evaluate_detector(detector, *test)
print()
print(summary_table({"baseline": report}))
