"""Labeled synthetic exercise recordings.

Each subject gets per-class amplitude/tempo scales, a gravity projection,
noise, and slow drift; a plan like [(1, 2), (4, 3)] means two repetitions of
class 1 followed by three chair-rising pairs. Regeneration with the same
seed is byte-identical.
"""

import numpy as np

from repseg.synth import CLASS_NAMES, make_cohort, windowize

recordings, profiles = make_cohort(3, plan=[(1, 2), (2, 2), (4, 2)], seed=7)

for rec, prof in zip(recordings, profiles):
    counts = {}
    for seg in rec.segments:
        counts[seg.class_id] = counts.get(seg.class_id, 0) + 1
    pretty = ", ".join(f"{CLASS_NAMES[c]}x{n}" for c, n in sorted(counts.items()))
    print(f"{rec.subject_id}: {rec.signal.shape[0]} samples, g'="
          f"{prof.g_prime:.3f}, noise {prof.noise_sigma:.3f} | {pretty}")

rec = recordings[0]
pairs = windowize(rec, window_len=200)
print(f"\n{rec.subject_id} cut into {len(pairs)} windows of 200")

# crude trace of the vertical channel, 1 char per 40 samples
vert = rec.signal[:, 0]
blocks = vert[:len(vert) // 40 * 40].reshape(-1, 40).mean(axis=1)
lo, hi = blocks.min(), blocks.max()
glyphs = " .:-=+*#"
row = "".join(glyphs[int((b - lo) / (hi - lo + 1e-12) * (len(glyphs) - 1))]
              for b in blocks)
print(f"vertical accel, coarse: |{row}|")
labels_row = "".join(str(rec.labels[i * 40]) for i in range(len(blocks)))
print(f"labels at block starts: |{labels_row}|")
