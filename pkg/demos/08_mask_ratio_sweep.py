"""Leave-one-subject-out benchmark across mask ratios, miniature edition.

Every subject takes one turn as the held-out test set; per ratio the fold
macro sample-f1 scores are averaged, then averaged again over seeds. Ratio 0
disables the reconstruction route entirely and serves as the baseline. The
full-size run (8 subjects, 6 ratios, 3 seeds at the compared ratios) lives
in the acceptance suite.
"""

import time

import numpy as np

from repseg.experiments import mask_ratio_sweep
from repseg.model import ModelConfig
from repseg.synth import make_cohort, windowize
from repseg.train import TrainConfig

recs, _ = make_cohort(3, plan=[(1, 2), (4, 1)], seed=29)
subject_windows = {}
for rec in recs:
    pairs = windowize(rec, 160)
    subject_windows[rec.subject_id] = (
        np.stack([w.samples for w, _ in pairs]),
        np.stack([lab for _, lab in pairs]))
print(f"{len(subject_windows)} subjects, "
      f"{sum(s.shape[0] for s, _ in subject_windows.values())} windows total")

mc = ModelConfig(d_model=16, n_heads=2, n_layers=1, dropout=0.0,
                 window_len=160, n_channels=6, n_classes=6, ffn_dim=32,
                 tcn_layers=4, tcn_channels=8)
tc = TrainConfig(batch_size=16, epochs=4, learning_rate=1e-2, seed=0,
                 eta=500.0, patch_len=16)

t0 = time.perf_counter()
sweep = mask_ratio_sweep(subject_windows, mc, tc, ratios=(0.0, 0.4, 0.8),
                         seeds_for=lambda ratio: [0])
print(f"\n{sweep.format_table()}")
print(f"\nswept in {time.perf_counter() - t0:.1f} s; report section:")
for row in sweep.table_section():
    print(f"  {row}")
