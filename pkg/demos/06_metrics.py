"""The evaluation stack on a hand-sized example.

Sample-wise F1 counts per-sample hits; segmental F1 first matches predicted
segments to true ones one-to-one by IoU, then requires IoU >= 0.75 for a
true positive; the agreement interval summarizes per-subject repetition-count
differences as mean +/- 2 std.
"""

import numpy as np

from repseg.metrics import (confusion_matrix, count_loa, labels_to_segments,
                            sample_f1, segmental_iou_f1)

truth = np.array([0] * 10 + [1] * 20 + [0] * 10 + [2] * 20 + [0] * 10)
pred = truth.copy()
pred[12:14] = 0        # nick the first segment
pred[40:52] = 2        # start the second one early
print("truth segments:", labels_to_segments(truth))
print("pred  segments:", labels_to_segments(pred))

srep = sample_f1(truth, pred, n_classes=3)
print(f"\nsample macro f1 = {srep.macro_f1:.4f}")
for c, score in srep.per_class.items():
    if score:
        print(f"  class {c}: p={score.precision:.3f} r={score.recall:.3f} "
              f"f1={score.f1:.3f}")

seg = segmental_iou_f1(labels_to_segments(truth), labels_to_segments(pred),
                       threshold=0.75)
print(f"segmental macro f1 @ 0.75 = {seg.macro_f1:.4f}")

print("\nrow-normalized confusion (truth on rows):")
print(np.array_str(confusion_matrix(truth, pred, 3), precision=3))

# count agreement across three subjects; one subject lost a repetition
subjects = [(labels_to_segments(truth), labels_to_segments(pred)),
            (labels_to_segments(truth), labels_to_segments(truth)),
            (labels_to_segments(truth), labels_to_segments(truth[:40]))]
loa = count_loa(subjects, n_classes=3)
for c, entry in loa.per_class.items():
    print(f"class {c} count agreement: {entry.mean_diff:+.2f} "
          f"[{entry.lower:+.2f}, {entry.upper:+.2f}] over pairs {entry.pairs}")
