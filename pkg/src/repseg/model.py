"""Transformer encoder with a dilated temporal-convolution classification head
and a signal reconstruction head.

One shared encoder feeds two routes: `classify` maps a window to per-sample
class probabilities through a stack of residual dilated convolutions, and
`reconstruct` maps an (optionally masked) window back to signal space through
a two-layer head. Both routes read the same parameter tensors, so gradients
from either loss update the same encoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

__all__ = [
    "ModelConfig",
    "SignalWindow",
    "Model",
    "positional_encoding",
    "param_shapes",
    "init_params",
]


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    Defaults are the full-scale configuration: 128-wide encoder, 8 heads,
    3 layers, 800-sample windows of 6 channels, 6 output classes, and a
    7-layer TCN head whose dilations double from 1 to 64.
    """

    d_model: int = 128
    n_heads: int = 8
    n_layers: int = 3
    dropout: float = 0.1
    window_len: int = 800
    n_channels: int = 6
    n_classes: int = 6
    ffn_dim: int | None = None
    tcn_layers: int = 7
    tcn_channels: int = 64
    kernel_size: int = 3

    def __post_init__(self):
        if self.ffn_dim is None:
            self.ffn_dim = 4 * self.d_model
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        for name in ("d_model", "n_heads", "n_layers", "window_len",
                     "n_channels", "n_classes", "ffn_dim", "tcn_layers",
                     "tcn_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def receptive_field(self) -> int:
        """Total TCN receptive field in samples (odd; radius is (rf-1)//2)."""
        spread = (self.kernel_size - 1) * sum(
            2 ** i for i in range(self.tcn_layers))
        return 1 + spread

    @property
    def influence_radius(self) -> int:
        return (self.receptive_field - 1) // 2

    def to_dict(self) -> dict:
        return {
            "d_model": self.d_model, "n_heads": self.n_heads,
            "n_layers": self.n_layers, "dropout": self.dropout,
            "window_len": self.window_len, "n_channels": self.n_channels,
            "n_classes": self.n_classes, "ffn_dim": self.ffn_dim,
            "tcn_layers": self.tcn_layers, "tcn_channels": self.tcn_channels,
            "kernel_size": self.kernel_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class SignalWindow:
    """A fixed-length slice of a recording: (T, N) float64 samples."""

    samples: np.ndarray
    sample_rate: float = 100.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be (T, N), got {self.samples.shape}")


def positional_encoding(t_len: int, d_model: int) -> np.ndarray:
    """Sinusoidal position table: sin on even columns, cos on odd columns,
    wavelengths geometric from 2*pi to 10000*2*pi."""
    pos = np.arange(t_len)[:, None]
    i = np.arange(0, d_model, 2)[None, :]
    angle = pos / np.power(10000.0, i / d_model)
    pe = np.zeros((t_len, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)[:, : d_model // 2]
    return pe


def param_shapes(config: ModelConfig) -> dict[str, tuple]:
    """Canonical parameter layout: name -> shape, in a stable order."""
    d, n, c = config.d_model, config.n_channels, config.n_classes
    f, ch, k = config.ffn_dim, config.tcn_channels, config.kernel_size
    shapes: dict[str, tuple] = {"embed.w": (n, d), "embed.b": (d,)}
    for i in range(config.n_layers):
        p = f"enc{i}"
        shapes[f"{p}.ln1.g"] = (d,)
        shapes[f"{p}.ln1.b"] = (d,)
        for mat in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{mat}"] = (d, d)
        for b in ("bq", "bk", "bv", "bo"):
            shapes[f"{p}.attn.{b}"] = (d,)
        shapes[f"{p}.ln2.g"] = (d,)
        shapes[f"{p}.ln2.b"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
    shapes["tcn_in.w"] = (d, ch)
    shapes["tcn_in.b"] = (ch,)
    for l in range(config.tcn_layers):
        shapes[f"tcn{l}.conv.k"] = (k, ch, ch)
        shapes[f"tcn{l}.conv.b"] = (ch,)
        shapes[f"tcn{l}.proj.w"] = (ch, ch)
        shapes[f"tcn{l}.proj.b"] = (ch,)
    shapes["tcn_out.w"] = (ch, c)
    shapes["tcn_out.b"] = (c,)
    shapes["recon.w1"] = (d, d)
    shapes["recon.b1"] = (d,)
    shapes["recon.w2"] = (d, n)
    shapes["recon.b2"] = (n,)
    return shapes


def _glorot(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    if len(shape) == 3:  # conv kernel (k, c_in, c_out)
        k, c_in, c_out = shape
        fan_in, fan_out = k * c_in, k * c_out
    else:
        fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(config: ModelConfig,
                rng: np.random.Generator) -> dict[str, Tensor]:
    """Fresh trainable parameters: Glorot-uniform mats, zero biases, unit
    layer-norm gains. The input embed uses std 0.02 instead of fan scaling
    so raw accelerometer rows (gravity offset ~9.8) enter at O(1)."""
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(config).items():
        if name == "embed.w":
            data = rng.normal(0.0, 0.02, size=shape)
        elif name.endswith(".g"):
            data = np.ones(shape)
        elif name.endswith((".b", ".b1", ".b2", ".bq", ".bk", ".bv", ".bo")):
            data = np.zeros(shape)
        else:
            data = _glorot(rng, shape)
        params[name] = ad.parameter(data)
    return params


class Model:
    """Shared-encoder model with classification and reconstruction routes."""

    def __init__(self, config: ModelConfig,
                 params: dict[str, Tensor] | None = None,
                 rng: np.random.Generator | None = None):
        self.config = config
        if params is None:
            if rng is None:
                raise ValueError("pass params or an rng to initialize them")
            params = init_params(config, rng)
        else:
            expected = param_shapes(config)
            got = {k: v.shape for k, v in params.items()}
            if got != expected:
                raise ValueError("params do not match the config layout")
        self.params = params
        self._pe_cache: dict[int, Tensor] = {}

    def parameters(self) -> dict[str, Tensor]:
        return self.params

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def _pe(self, t_len: int) -> Tensor:
        if t_len not in self._pe_cache:
            self._pe_cache[t_len] = ad.constant(
                positional_encoding(t_len, self.config.d_model))
        return self._pe_cache[t_len]

    @staticmethod
    def _samples(window) -> np.ndarray:
        if isinstance(window, SignalWindow):
            return window.samples
        return np.asarray(window, dtype=np.float64)

    def _maybe_dropout(self, x: Tensor, training: bool,
                       rng: np.random.Generator | None) -> Tensor:
        if not training or self.config.dropout == 0.0:
            return x
        if rng is None:
            raise ValueError("training-mode forward needs an rng for dropout")
        return ad.dropout(x, self.config.dropout, rng)

    def _attention(self, x: Tensor, layer: int, training: bool,
                   rng: np.random.Generator | None) -> Tensor:
        p = self.params
        pre = f"enc{layer}.attn"
        q = ad.add(ad.matmul(x, p[f"{pre}.wq"]), p[f"{pre}.bq"])
        k = ad.add(ad.matmul(x, p[f"{pre}.wk"]), p[f"{pre}.bk"])
        v = ad.add(ad.matmul(x, p[f"{pre}.wv"]), p[f"{pre}.bv"])
        heads_q = ad.split_cols(q, self.config.n_heads)
        heads_k = ad.split_cols(k, self.config.n_heads)
        heads_v = ad.split_cols(v, self.config.n_heads)
        inv_sqrt_dk = 1.0 / np.sqrt(self.config.head_dim)
        outs = []
        for hq, hk, hv in zip(heads_q, heads_k, heads_v):
            logits = ad.scale(ad.matmul(hq, ad.transpose(hk)), inv_sqrt_dk)
            attn = ad.softmax_rows(logits)  # full bidirectional context
            outs.append(ad.matmul(attn, hv))
        merged = ad.concat_cols(outs)
        out = ad.add(ad.matmul(merged, p[f"{pre}.wo"]), p[f"{pre}.bo"])
        return self._maybe_dropout(out, training, rng)

    def _ffn(self, x: Tensor, layer: int, training: bool,
             rng: np.random.Generator | None) -> Tensor:
        p = self.params
        pre = f"enc{layer}.ffn"
        h = ad.relu(ad.add(ad.matmul(x, p[f"{pre}.w1"]), p[f"{pre}.b1"]))
        out = ad.add(ad.matmul(h, p[f"{pre}.w2"]), p[f"{pre}.b2"])
        return self._maybe_dropout(out, training, rng)

    def encode(self, window, training: bool = False,
               rng: np.random.Generator | None = None) -> Tensor:
        """Embed + positional encoding + pre-norm residual encoder stack."""
        samples = self._samples(window)
        if samples.shape[1] != self.config.n_channels:
            raise ValueError(
                f"window has {samples.shape[1]} channels, config expects "
                f"{self.config.n_channels}")
        x = ad.constant(samples)
        h = ad.add(ad.add(ad.matmul(x, self.params["embed.w"]),
                          self.params["embed.b"]),
                   self._pe(samples.shape[0]))
        for i in range(self.config.n_layers):
            p = self.params
            a = ad.layer_norm(h, p[f"enc{i}.ln1.g"], p[f"enc{i}.ln1.b"])
            h = ad.add(h, self._attention(a, i, training, rng))
            f = ad.layer_norm(h, p[f"enc{i}.ln2.g"], p[f"enc{i}.ln2.b"])
            h = ad.add(h, self._ffn(f, i, training, rng))
        return h

    def tcn_logits(self, features: Tensor) -> Tensor:
        """Residual dilated-conv stack over encoder features -> (T, C) logits.

        Dilations run 1, 2, 4, ... so a logit at time t depends on features
        within influence_radius samples only."""
        p = self.params
        h = ad.add(ad.matmul(features, p["tcn_in.w"]), p["tcn_in.b"])
        for l in range(self.config.tcn_layers):
            c = ad.relu(ad.dilated_conv1d(
                h, p[f"tcn{l}.conv.k"], p[f"tcn{l}.conv.b"], dilation=2 ** l))
            c = ad.add(ad.matmul(c, p[f"tcn{l}.proj.w"]), p[f"tcn{l}.proj.b"])
            h = ad.add(h, c)
        return ad.add(ad.matmul(h, p["tcn_out.w"]), p["tcn_out.b"])

    def classify(self, window, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        """Per-sample class probabilities (T, C); rows sum to 1."""
        feats = self.encode(window, training, rng)
        return ad.softmax_rows(self.tcn_logits(feats))

    def reconstruct(self, window, training: bool = False,
                    rng: np.random.Generator | None = None) -> Tensor:
        """Signal estimate (T, N) from the shared encoder features."""
        feats = self.encode(window, training, rng)
        p = self.params
        h = ad.relu(ad.add(ad.matmul(feats, p["recon.w1"]), p["recon.b1"]))
        return ad.add(ad.matmul(h, p["recon.w2"]), p["recon.b2"])

    def predict_labels(self, window) -> np.ndarray:
        """Argmax class per sample, eval mode, no graph recording."""
        with ad.no_grad():
            probs = self.classify(window, training=False)
        return np.argmax(probs.data, axis=1)
