"""Optimization loop for the dual-route model.

Every step draws fresh masks, runs the classification route on the unmasked
window and the reconstruction route on the masked window, combines the two
losses into one scalar, and updates all parameters together, so the encoder
is shared by construction. Leave-one-subject-out splits live here too.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .masking import (LossWeights, apply_mask, combined_loss, cross_entropy,
                      draw_mask, masked_mse, one_hot)
from .model import Model, ModelConfig, SignalWindow


class TrainingDivergedError(RuntimeError):
    """A loss went non-finite; carries the step and component values."""

    def __init__(self, epoch: int, step: int,
                 loss: float, ce: float, mse: float):
        super().__init__(
            f"non-finite loss at epoch {epoch}, step {step}: "
            f"total={loss!r} ce={ce!r} mse={mse!r}")
        self.epoch = epoch
        self.step = step
        self.loss = loss
        self.ce = ce
        self.mse = mse


@dataclass
class TrainConfig:
    """Knobs for one training run; defaults are the reference settings."""

    batch_size: int = 16
    epochs: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    mask_ratio: float = 0.8
    eta: float = 500.0
    patch_len: int = 40
    early_stop_patience: int | None = None  # epochs; None disables
    class_weighting: bool = False  # inverse-frequency CE weights when True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask_ratio must be in [0, 1], got "
                             f"{self.mask_ratio}")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.patch_len < 1:
            raise ValueError("patch_len must be >= 1")
        if self.early_stop_patience is not None \
                and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1 or None")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown train-config fields: {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class Fold:
    test_subject: str
    train_subjects: tuple[str, ...]


FoldPlan = list[Fold]


def make_losocv(subject_ids) -> FoldPlan:
    """One fold per subject, held out in the given order."""
    ids = list(subject_ids)
    if len(ids) < 2:
        raise ValueError(f"need at least 2 subjects, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate subject ids")
    return [Fold(s, tuple(t for t in ids if t != s)) for s in ids]


class Adam:
    """Adaptive-moment optimizer with bias correction, state per parameter.

    A parameter whose .grad is None is treated as having a zero gradient.
    """

    def __init__(self, params: dict[str, ad.Tensor],
                 learning_rate: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self._v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else 0.0
            m = self._m[name] = b1 * self._m[name] + (1.0 - b1) * g
            v = self._v[name] = b2 * self._v[name] + (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class StepRecord:
    epoch: int
    step: int
    loss: float
    ce: float
    mse: float


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    ce: float
    mse: float


@dataclass
class TrainResult:
    model: Model
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    stopped_early: bool = False
    wall_clock_s: float = 0.0

    def curves(self) -> dict:
        """Plot-ready loss curves, one row per epoch."""
        return {
            "epoch": [e.epoch for e in self.epochs],
            "loss": [e.loss for e in self.epochs],
            "ce": [e.ce for e in self.epochs],
            "mse": [e.mse for e in self.epochs],
        }


def class_frequencies(labels: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(labels.reshape(-1), minlength=n_classes)
    return counts / max(labels.size, 1)


def _inverse_frequency_weights(labels: np.ndarray,
                               n_classes: int) -> np.ndarray:
    # absent classes get weight 0 (they contribute no CE terms anyway)
    counts = np.bincount(labels.reshape(-1), minlength=n_classes)
    weights = np.zeros(n_classes)
    present = counts > 0
    weights[present] = labels.size / (present.sum() * counts[present])
    return weights


def _as_batches(order: np.ndarray, batch_size: int):
    for i in range(0, order.size, batch_size):
        yield order[i:i + batch_size]


def _mean_of(terms: list[ad.Tensor]) -> ad.Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = ad.add(total, t)
    return ad.scale(total, 1.0 / len(terms))


def _validation_ce(model: Model, samples: np.ndarray, labels: np.ndarray,
                   n_classes: int) -> float:
    with ad.no_grad():
        scores = [cross_entropy(model.classify(samples[i]),
                                one_hot(labels[i], n_classes)).item()
                  for i in range(samples.shape[0])]
    return float(np.mean(scores))


def train_fold(samples: np.ndarray, labels: np.ndarray,
               model_config: ModelConfig, config: TrainConfig,
               params: dict[str, ad.Tensor] | None = None,
               val_samples: np.ndarray | None = None,
               val_labels: np.ndarray | None = None) -> TrainResult:
    """Train on (W, T, N) windows with (W, T) integer labels.

    Each step: classification sees the unmasked window, reconstruction sees
    the same window with freshly drawn patches zeroed, and the total
    eta * ce + mse is backpropagated once through the shared encoder. With an
    empty mask the reconstruction term is exactly zero, so that route is
    skipped and only the classification loss trains the network.

    Early stopping (optional) watches mean validation cross-entropy and
    restores the best parameters seen.
    """
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if samples.ndim != 3:
        raise ValueError(f"samples must be (W, T, N), got {samples.shape}")
    if labels.shape != samples.shape[:2]:
        raise ValueError(f"labels shape {labels.shape} does not match "
                         f"windows {samples.shape[:2]}")
    n_windows, window_len, n_channels = samples.shape
    if n_windows < 1:
        raise ValueError("need at least one training window")
    if window_len % config.patch_len != 0:
        raise ValueError(f"window length {window_len} not divisible by "
                         f"patch_len {config.patch_len}")
    use_validation = config.early_stop_patience is not None
    if use_validation and (val_samples is None or val_labels is None):
        raise ValueError("early stopping needs a validation slice")

    n_classes = model_config.n_classes
    rng = np.random.default_rng(config.seed)
    model = Model(model_config, params=params,
                  rng=None if params is not None else rng)
    optimizer = Adam(model.parameters(), config.learning_rate,
                     config.beta1, config.beta2, config.eps)
    class_weights = (_inverse_frequency_weights(labels, n_classes)
                     if config.class_weighting else None)
    onehots = [one_hot(labels[i], n_classes) for i in range(n_windows)]

    result = TrainResult(model=model)
    best_val = np.inf
    best_params = None
    stall = 0
    step_no = 0
    started = time.perf_counter()

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_windows)
        epoch_steps = []
        for batch in _as_batches(order, config.batch_size):
            step_no += 1
            with ad.Tape() as tape:
                ce_terms = []
                mse_terms = []
                for i in batch:
                    window = SignalWindow(samples[i])
                    probs = model.classify(window, training=True, rng=rng)
                    ce_terms.append(
                        cross_entropy(probs, onehots[i], class_weights))
                    spec = draw_mask(window_len, n_channels,
                                     config.patch_len, config.mask_ratio, rng)
                    if spec.masked_patches.size:
                        recon = model.reconstruct(apply_mask(window, spec),
                                                  training=True, rng=rng)
                        mse_terms.append(
                            masked_mse(samples[i], recon,
                                       spec.sample_mask()))
                ce = _mean_of(ce_terms)
                mse = (_mean_of(mse_terms) if mse_terms
                       else ad.constant(np.zeros(())))
                loss = combined_loss(ce, mse, LossWeights(eta=config.eta))
                rec = StepRecord(epoch, step_no, loss.item(), ce.item(),
                                 mse.item())
                if not (np.isfinite(rec.loss) and np.isfinite(rec.ce)
                        and np.isfinite(rec.mse)):
                    raise TrainingDivergedError(epoch, step_no, rec.loss,
                                                rec.ce, rec.mse)
                tape.backward(loss)
            optimizer.step()
            optimizer.zero_grad()
            epoch_steps.append(rec)
        result.steps.extend(epoch_steps)
        result.epochs.append(EpochRecord(
            epoch,
            float(np.mean([s.loss for s in epoch_steps])),
            float(np.mean([s.ce for s in epoch_steps])),
            float(np.mean([s.mse for s in epoch_steps]))))

        if use_validation:
            score = _validation_ce(model, val_samples, val_labels, n_classes)
            if score < best_val:
                best_val = score
                best_params = {k: p.data.copy()
                               for k, p in model.parameters().items()}
                stall = 0
            else:
                stall += 1
                if stall >= config.early_stop_patience:
                    result.stopped_early = True
                    break

    if best_params is not None:
        for k, p in model.parameters().items():
            p.data = best_params[k]
    result.wall_clock_s = time.perf_counter() - started
    return result


def predict(model: Model, samples: np.ndarray) -> np.ndarray:
    """Per-sample argmax labels for a stack of unmasked windows (W, T)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 2:
        samples = samples[None]
    return np.stack([model.predict_labels(samples[i])
                     for i in range(samples.shape[0])])


def sample_accuracy(model: Model, samples: np.ndarray,
                    labels: np.ndarray) -> float:
    """Fraction of samples whose predicted class matches the label."""
    preds = predict(model, samples)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim == 1:
        labels = labels[None]
    return float(np.mean(preds == labels))
