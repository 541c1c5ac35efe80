"""Minimal reverse-mode autodiff over dense NumPy arrays.

Just enough machinery for the two classifier families: affine maps, tanh,
ReLU, row softmax, dropout, time pooling, 1-D convolution (through the
kernel backend) and cross-entropy. Graphs are built define-by-run: each op
records its parents and a closure that routes the upstream gradient.
``backward`` walks the tape in reverse topological order exactly once; a
second call on the same loss raises, which catches silent gradient
accumulation bugs.

Training math runs at float32; the finite-difference harness re-runs the
same graph at float64 (dtype follows the arrays you feed in).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import GraphNotBuilt, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def parameter(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=False)


def _op(data, parents, backward_fn) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t: Tensor, g) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def affine(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w.T + b for a (T, a) or (a,) input and (m, a) weight."""
    if x.data.shape[-1] != w.data.shape[1]:
        raise ShapeMismatch(f"affine: input dim {x.data.shape[-1]} vs weight {w.data.shape}")
    if b is not None and b.data.shape != (w.data.shape[0],):
        raise ShapeMismatch(f"affine: bias shape {b.data.shape} vs weight {w.data.shape}")
    y = x.data @ w.data.T
    if b is not None:
        y = y + b.data

    def backward_fn(out):
        g = out.grad
        _accumulate(x, g @ w.data)
        if x.data.ndim == 1:
            _accumulate(w, np.outer(g, x.data))
            if b is not None:
                _accumulate(b, g)
        else:
            _accumulate(w, g.T @ x.data)
            if b is not None:
                _accumulate(b, g.sum(axis=0))

    return _op(y, [t for t in (x, w, b) if t is not None], backward_fn)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward_fn(out):
        _accumulate(x, out.grad * (1.0 - y * y))

    return _op(y, [x], backward_fn)


def relu(x: Tensor) -> Tensor:
    y = np.maximum(x.data, 0)

    def backward_fn(out):
        _accumulate(x, out.grad * (x.data > 0))

    return _op(y, [x], backward_fn)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax along the last axis, max-subtracted for stability."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(out):
        g = out.grad
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(x, y * (g - dot))

    return _op(y, [x], backward_fn)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-p); eval mode is the identity."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout p must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an explicit rng for reproducibility")
    keep = (rng.random(x.data.shape) >= p).astype(x.data.dtype)
    scale = np.asarray(1.0 / (1.0 - p), dtype=x.data.dtype)
    y = x.data * keep * scale

    def backward_fn(out):
        _accumulate(x, out.grad * keep * scale)

    return _op(y, [x], backward_fn)


def avgpool_time(x: Tensor, win: int, stride: int) -> Tensor:
    """Average rows of a (T, d) input over windows; remainder frames dropped."""
    t, d = x.data.shape
    if win < 1 or stride < 1:
        raise ShapeMismatch("avgpool_time: win and stride must be >= 1")
    t_out = (t - win) // stride + 1
    if t_out < 1:
        raise ShapeMismatch(f"avgpool_time: {t} frames with window {win}")
    starts = stride * np.arange(t_out)
    idx = starts[:, None] + np.arange(win)[None, :]
    y = x.data[idx].mean(axis=1)

    def backward_fn(out):
        g = np.zeros_like(x.data)
        np.add.at(g, idx.reshape(-1), np.repeat(out.grad / win, win, axis=0))
        _accumulate(x, g)

    return _op(y, [x], backward_fn)


def transpose(x: Tensor) -> Tensor:
    y = np.ascontiguousarray(x.data.T)

    def backward_fn(out):
        _accumulate(x, out.grad.T)

    return _op(y, [x], backward_fn)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None,
           stride: int = 1, pad: int = 0) -> Tensor:
    """1-D convolution of a (C_in, L) input with a (C_out, C_in, k) kernel."""
    c_in, length = x.data.shape
    c_out, c_in_w, width = w.data.shape
    if c_in != c_in_w:
        raise ShapeMismatch(f"conv1d: input channels {c_in} vs kernel {c_in_w}")
    if b is not None and b.data.shape != (c_out,):
        raise ShapeMismatch(f"conv1d: bias shape {b.data.shape}")
    l_out = (length + 2 * pad - width) // stride + 1
    if l_out < 1:
        raise ShapeMismatch(f"conv1d: length {length} too short for kernel {width}")
    xd = np.ascontiguousarray(x.data)
    wd = np.ascontiguousarray(w.data)
    y = _kernels.conv1d_forward(xd, wd, stride, pad)
    if b is not None:
        y = y + b.data[:, None]

    def backward_fn(out):
        g = np.ascontiguousarray(out.grad)
        gx, gw = _kernels.conv1d_backward(xd, wd, g, stride, pad)
        _accumulate(x, gx)
        _accumulate(w, gw)
        if b is not None:
            _accumulate(b, g.sum(axis=1))

    return _op(y, [t for t in (x, w, b) if t is not None], backward_fn)


def matvec(x: Tensor, w: Tensor) -> Tensor:
    """(T, k) @ (k,) -> (T,), the attention score op."""
    if x.data.shape[1] != w.data.shape[0]:
        raise ShapeMismatch(f"matvec: {x.data.shape} @ {w.data.shape}")
    y = x.data @ w.data

    def backward_fn(out):
        g = out.grad
        _accumulate(x, np.outer(g, w.data))
        _accumulate(w, x.data.T @ g)

    return _op(y, [x, w], backward_fn)


def weighted_sum(alpha: Tensor, x: Tensor) -> Tensor:
    """(T,) @ (T, k) -> (k,), a weighted frame average."""
    if alpha.data.shape[0] != x.data.shape[0]:
        raise ShapeMismatch(f"weighted_sum: {alpha.data.shape} vs {x.data.shape}")
    y = alpha.data @ x.data

    def backward_fn(out):
        g = out.grad
        _accumulate(alpha, x.data @ g)
        _accumulate(x, np.outer(alpha.data, g))

    return _op(y, [alpha, x], backward_fn)


def mean_rows(x: Tensor) -> Tensor:
    y = x.data.mean(axis=0)

    def backward_fn(out):
        _accumulate(x, np.tile(out.grad / x.data.shape[0], (x.data.shape[0], 1)))

    return _op(y, [x], backward_fn)


def sum_all(x: Tensor) -> Tensor:
    y = np.asarray(x.data.sum())

    def backward_fn(out):
        _accumulate(x, np.full_like(x.data, out.grad))

    return _op(y, [x], backward_fn)


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Negative log-softmax of the true class, stable via max subtraction."""
    if logits.data.ndim != 1:
        raise ShapeMismatch(f"cross_entropy expects a logit vector, got {logits.data.shape}")
    if not 0 <= label < logits.data.shape[0]:
        raise ShapeMismatch(f"label {label} out of range for {logits.data.shape[0]} classes")
    z = logits.data - logits.data.max()
    lse = np.log(np.exp(z).sum())
    loss = np.asarray(lse - z[label])

    def backward_fn(out):
        p = np.exp(z - lse)
        p[label] -= 1.0
        _accumulate(logits, out.grad * p)

    return _op(loss, [logits], backward_fn)


def backward(loss: Tensor) -> None:
    """Populate gradients of everything the scalar loss depends on.

    Gradients accumulate into .grad, so several losses may be backpropagated
    into the same parameters (the batch accumulation group); zero grads at
    step boundaries. Calling backward twice on one loss is an error.
    """
    if loss.data.size != 1:
        raise ShapeMismatch(f"backward expects a scalar loss, got shape {loss.data.shape}")
    if loss._consumed:
        raise GraphNotBuilt("backward already ran on this loss; run a fresh forward pass")
    if not loss.requires_grad:
        raise GraphNotBuilt("loss does not depend on any parameter")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node)
    loss._consumed = True


@dataclass
class FiniteDiffReport:
    max_rel_err: float
    worst_param: str | None
    n_entries: int
    per_param: dict = field(default_factory=dict)


def finite_diff_check(loss_fn, params, eps: float = 1e-5,
                      rel_floor: float = 1e-6,
                      max_entries_per_param: int | None = None,
                      seed: int = 0) -> FiniteDiffReport:
    """Compare analytic gradients against central differences.

    loss_fn must rebuild the forward pass from the current parameter values
    and be deterministic (dropout off or frozen). params is a list of
    Tensors or (name, Tensor) pairs. Relative error uses
    |a - fd| / max(|a|, |fd|, rel_floor). Precision follows the parameter
    dtype: build the model at float64 for tight tolerances.
    """
    named = [p if isinstance(p, tuple) else (f"param{i}", p) for i, p in enumerate(params)]
    if not named:
        return FiniteDiffReport(0.0, None, 0)

    for _, t in named:
        t.grad = None
    backward(loss_fn())
    analytic = {name: (np.zeros_like(t.data) if t.grad is None else t.grad.copy())
                for name, t in named}

    rng = np.random.default_rng(seed)
    report = FiniteDiffReport(0.0, None, 0)
    for name, t in named:
        flat = t.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries_per_param is not None and flat.size > max_entries_per_param:
            indices = np.sort(rng.choice(flat.size, max_entries_per_param, replace=False))
        worst = 0.0
        for i in indices:
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(loss_fn().data)
            flat[i] = orig - eps
            f_minus = float(loss_fn().data)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - fd) / max(abs(a), abs(fd), rel_floor)
            worst = max(worst, rel)
            report.n_entries += 1
        report.per_param[name] = worst
        if worst >= report.max_rel_err:
            report.max_rel_err = worst
            report.worst_param = name
    return report
