"""Reverse-mode automatic differentiation on float64 numpy arrays.

Minimal tape-based engine: a `Tensor` wraps a contiguous float64 array, ops
record themselves on the innermost active `Tape`, and `Tape.backward(loss)`
replays the records in reverse, accumulating gradients into `Tensor.grad`.
Only the ops the model needs are provided; every op validates its shapes and
raises ValueError on mismatch rather than broadcasting silently.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "GraphError",
    "no_grad",
    "constant",
    "parameter",
    "add",
    "sub",
    "mul",
    "scale",
    "neg",
    "matmul",
    "transpose",
    "relu",
    "log_clamped",
    "softmax_rows",
    "layer_norm",
    "dilated_conv1d",
    "sum_all",
    "dropout",
    "split_cols",
    "concat_cols",
]


class GraphError(RuntimeError):
    """Raised on tape misuse: double backward, detached loss, non-scalar loss."""


class Tensor:
    """A float64 array plus gradient bookkeeping.

    `grad` is populated (as a plain ndarray) by `Tape.backward` for tensors
    with `requires_grad=True`; gradients accumulate across backward calls on
    different tapes until `zero_grad` is called.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        # asarray keeps 0-d scalars 0-d (ascontiguousarray would promote to 1-d)
        arr = np.asarray(data, dtype=np.float64, order="C")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return (f"Tensor(shape={self.data.shape}, requires_grad="
                f"{self.requires_grad})")

    # arithmetic sugar; all graph logic lives in the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


class _Op:
    __slots__ = ("out", "inputs", "backward_fn")

    def __init__(self, out, inputs, backward_fn):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


# innermost active tape; None while no tape is open or inside no_grad()
_ACTIVE: list = []


class Tape:
    """Records ops executed inside its `with` block, in execution order.

    Execution order is a topological order of the graph, so backward simply
    walks the records reversed. One backward per tape; a second call raises.
    """

    def __init__(self):
        self._ops: list[_Op] = []
        self._produced: set[int] = set()
        self._used = False

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _ACTIVE.pop()
        if popped is not self:
            raise GraphError("tape nesting corrupted")
        return False

    def _record(self, op: _Op):
        self._ops.append(op)
        self._produced.add(id(op.out))

    def backward(self, loss: Tensor):
        """Seed d(loss)/d(loss)=1 and accumulate gradients into leaf tensors."""
        if self._used:
            raise GraphError("backward called twice on the same tape")
        if loss.data.size != 1:
            raise GraphError(f"loss must be scalar, got shape {loss.data.shape}")
        if id(loss) not in self._produced:
            raise GraphError("loss was not produced under this tape (detached graph)")
        self._used = True

        # local grad store for intermediates; leaves accumulate into .grad
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for op in reversed(self._ops):
            g_out = grads.pop(id(op.out), None)
            if g_out is None:
                continue
            in_grads = op.backward_fn(g_out)
            for t, g in zip(op.inputs, in_grads):
                if g is None or not t.requires_grad:
                    continue
                if id(t) in self._produced:
                    prev = grads.get(id(t))
                    grads[id(t)] = g if prev is None else prev + g
                else:
                    t.accumulate_grad(g)


class no_grad:
    """Context manager that suspends tape recording (forward only)."""

    def __enter__(self):
        _ACTIVE.append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE.pop()
        return False


def _tape():
    return _ACTIVE[-1] if _ACTIVE else None


def _make(out_data, inputs, backward_fn) -> Tensor:
    rg = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=rg)
    tape = _tape()
    if tape is not None and rg:
        tape._record(_Op(out, inputs, backward_fn))
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts a 1-D `b` as a per-column bias row."""
    if a.shape == b.shape:
        return _make(a.data + b.data, (a, b), lambda g: (g, g))
    if b.data.ndim == 1 and a.data.ndim == 2 and b.shape[0] == a.shape[1]:
        return _make(a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    return _make(a.data * b.data, (a, b),
                 lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,))


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _make(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ValueError(f"transpose expects 2-D, got {a.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return _make(a.data * mask, (a,), lambda g: (g * mask,))


def log_clamped(a: Tensor, eps: float = 1e-12) -> Tensor:
    """log(max(a, eps)); gradient is 1/a above the clamp and 0 below it."""
    clamped = np.maximum(a.data, eps)
    live = a.data > eps
    return _make(np.log(clamped), (a,),
                 lambda g: (np.where(live, g / clamped, 0.0),))


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax of a 2-D tensor, shifted by the row max for stability."""
    if a.data.ndim != 2:
        raise ValueError(f"softmax_rows expects 2-D, got {a.shape}")
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        dot = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - dot),)

    return _make(s, (a,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor,
               eps: float = 1e-5) -> Tensor:
    """Per-row normalization of a 2-D tensor with learned gain and bias."""
    if x.data.ndim != 2:
        raise ValueError(f"layer_norm expects 2-D, got {x.shape}")
    d = x.shape[1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ValueError(
            f"layer_norm gain/bias must be ({d},), got {gain.shape}/{bias.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = xhat * gain.data + bias.data

    def backward(g):
        g_gain = (g * xhat).sum(axis=0)
        g_bias = g.sum(axis=0)
        g_hat = g * gain.data
        m1 = g_hat.mean(axis=1, keepdims=True)
        m2 = (g_hat * xhat).mean(axis=1, keepdims=True)
        g_x = inv_std * (g_hat - m1 - xhat * m2)
        return (g_x, g_gain, g_bias)

    return _make(out, (x, gain, bias), backward)


def dilated_conv1d(x: Tensor, kernel: Tensor, bias: Tensor | None,
                   dilation: int) -> Tensor:
    """1-D convolution over time with zero 'same' padding.

    `x` is (T, C_in), `kernel` is (k, C_in, C_out) with odd k, and the output
    keeps length T: position t sees inputs at t + (j - (k-1)/2) * dilation,
    so the window is centered (non-causal).
    """
    if x.data.ndim != 2 or kernel.data.ndim != 3:
        raise ValueError(
            f"conv expects x (T,Cin) and kernel (k,Cin,Cout), got "
            f"{x.shape} and {kernel.shape}")
    k, c_in, c_out = kernel.shape
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    if x.shape[1] != c_in:
        raise ValueError(f"conv channel mismatch: x has {x.shape[1]}, "
                         f"kernel expects {c_in}")
    if bias is not None and bias.shape != (c_out,):
        raise ValueError(f"conv bias must be ({c_out},), got {bias.shape}")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")

    t_len = x.shape[0]
    pad = dilation * (k - 1) // 2
    xp = np.zeros((t_len + 2 * pad, c_in))
    xp[pad:pad + t_len] = x.data

    out = np.zeros((t_len, c_out))
    for j in range(k):
        out += xp[j * dilation:j * dilation + t_len] @ kernel.data[j]
    if bias is not None:
        out += bias.data

    def backward(g):
        g_xp = np.zeros_like(xp)
        g_k = np.empty_like(kernel.data)
        for j in range(k):
            sl = slice(j * dilation, j * dilation + t_len)
            g_xp[sl] += g @ kernel.data[j].T
            g_k[j] = xp[sl].T @ g
        g_x = g_xp[pad:pad + t_len]
        if bias is None:
            return (g_x, g_k)
        return (g_x, g_k, g.sum(axis=0))

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return _make(out, inputs, backward)


def sum_all(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar (shape ()) tensor."""
    shape = a.data.shape
    return _make(np.asarray(a.data.sum()), (a,),
                 lambda g: (np.full(shape, float(g)),))


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability `rate`, scale the rest by
    1/(1-rate) so the expectation is unchanged. Apply in training only."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return _make(a.data * keep, (a,), lambda g: (g * keep,))


def split_cols(a: Tensor, n_parts: int) -> list[Tensor]:
    """Split a 2-D tensor into `n_parts` equal column blocks."""
    if a.data.ndim != 2 or a.shape[1] % n_parts != 0:
        raise ValueError(f"cannot split {a.shape} into {n_parts} column blocks")
    width = a.shape[1] // n_parts
    parts = []
    for i in range(n_parts):
        sl = slice(i * width, (i + 1) * width)

        def backward(g, sl=sl, shape=a.shape):
            g_full = np.zeros(shape)
            g_full[:, sl] = g
            return (g_full,)

        parts.append(_make(a.data[:, sl].copy(), (a,), backward))
    return parts


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Concatenate 2-D tensors with equal row counts along columns."""
    rows = parts[0].shape[0]
    if any(p.data.ndim != 2 or p.shape[0] != rows for p in parts):
        raise ValueError("concat_cols needs 2-D tensors with equal row counts")
    widths = [p.shape[1] for p in parts]
    edges = np.concatenate([[0], np.cumsum(widths)])

    def backward(g):
        return tuple(g[:, edges[i]:edges[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts], axis=1),
                 tuple(parts), backward)
