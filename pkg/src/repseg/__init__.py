"""Per-sample recognition of exercise repetitions in 6-axis inertial signals.

A self-contained numpy stack: reverse-mode autodiff (`autodiff`), a Transformer
encoder with a dilated temporal-convolution classification head and a masked
reconstruction head (`model`), patch masking and the combined training loss
(`masking`), a synthetic recording generator (`synth`), the training harness
with leave-one-subject-out folds (`train`), sample-wise and segment-wise
evaluation metrics (`metrics`), chair-rising velocity estimation (`velocity`),
and file formats plus the command line front end (`dataio`, `cli`).
"""

__version__ = "0.1.0"

from . import (autodiff, dataio, experiments, masking, metrics, model, synth,
               train, velocity)

__all__ = [
    "autodiff",
    "dataio",
    "experiments",
    "masking",
    "metrics",
    "model",
    "synth",
    "train",
    "velocity",
    "__version__",
]
