"""Reverse-mode automatic differentiation over dense float64 arrays.

Each operation records its inputs and a backward closure on the result node;
`backward()` topologically sorts the recorded graph and accumulates gradients
additively across fan-out. Only the ops the two models need are provided --
no general broadcasting beyond what they use.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import erf

NEG_INF = -1e30  # additive mask value; exp() underflows to exactly 0.0

# per-thread so parallel no-grad rollouts cannot race each other's state
_grad_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (rollouts, evaluation) on this thread."""
    prev = grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = prev


class GraphError(RuntimeError):
    """Backward called on a non-scalar or detached node."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.size != 1:
            raise GraphError(f"backward requires a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("backward on a node detached from any parameter")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.accumulate_grad(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, neg(_wrap(other)))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return pow_const(self, p)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes if len(axes) > 1 else axes[0])

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[np.ndarray], None],
) -> Tensor:
    out = Tensor(data)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcast to reach `grad.shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.accumulate_grad(g)


# -- arithmetic -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data + b.data

    def backward(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return _make(out, (a, b), backward)


def neg(a) -> Tensor:
    a = _wrap(a)
    return _make(-a.data, (a,), lambda g: _acc(a, -g))


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = a.data * b.data

    def backward(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), backward)


def pow_const(a, p: float) -> Tensor:
    a = _wrap(a)
    out = a.data**p

    def backward(g):
        _acc(a, g * p * a.data ** (p - 1))

    return _make(out, (a,), backward)


def matmul(a, b) -> Tensor:
    """2-D or batched 3-D matrix product (no cross-rank broadcasting)."""
    a, b = _wrap(a), _wrap(b)
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise ValueError(f"matmul expects equal-rank 2-D/3-D operands, got {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        _acc(a, g @ b.data.swapaxes(-1, -2))
        _acc(b, a.data.swapaxes(-1, -2) @ g)

    return _make(out, (a, b), backward)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    old = a.data.shape
    return _make(
        a.data.reshape(shape), (a,), lambda g: _acc(a, g.reshape(old))
    )


def transpose(a, axes) -> Tensor:
    a = _wrap(a)
    inverse = tuple(np.argsort(axes))
    return _make(
        a.data.transpose(axes), (a,), lambda g: _acc(a, g.transpose(inverse))
    )


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.data.shape))

    return _make(out, (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    n = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _acc(a, np.broadcast_to(g, a.data.shape) / n)

    return _make(out, (a,), backward)


# -- nonlinearities -------------------------------------------------------


def gelu(a) -> Tensor:
    """Exact Gaussian-error linear unit (smooth, finite-difference friendly)."""
    a = _wrap(a)
    cdf = 0.5 * (1.0 + erf(a.data / np.sqrt(2.0)))
    out = a.data * cdf

    def backward(g):
        pdf = np.exp(-0.5 * a.data**2) / np.sqrt(2.0 * np.pi)
        _acc(a, g * (cdf + a.data * pdf))

    return _make(out, (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stable softmax along `axis` (max-subtraction)."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _acc(a, y * (g - dot))

    return _make(y, (a,), backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        p = np.exp(out)
        _acc(a, g - p * g.sum(axis=axis, keepdims=True))

    return _make(out, (a,), backward)


# -- gather / embedding ---------------------------------------------------


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup; backward scatter-adds into the table gradient."""
    ids = np.asarray(ids, dtype=np.intp)
    out = table.data[ids]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        _acc(table, gt)

    return _make(out, (table,), backward)


def take_rows(a, rows) -> Tensor:
    """Select rows of a 2-D tensor (used for last-position logits)."""
    a = _wrap(a)
    rows = np.asarray(rows, dtype=np.intp)
    out = a.data[rows]

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, rows, g)
        _acc(a, ga)

    return _make(out, (a,), backward)


def gather_pairs(a, rows, cols) -> Tensor:
    """Pick a[rows[i], cols[i]] for each i; returns a 1-D tensor."""
    a = _wrap(a)
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    out = a.data[rows, cols]

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, cols), g)
        _acc(a, ga)

    return _make(out, (a,), backward)


# -- composites -----------------------------------------------------------


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = mean(mul(centered, centered), axis=-1, keepdims=True)
    inv = pow_const(add(var, eps), -0.5)
    return add(mul(mul(centered, inv), gain), bias)


def causal_mask(n: int) -> np.ndarray:
    """Additive (n, n) mask: 0 on/below the diagonal, large-negative above."""
    m = np.zeros((n, n))
    m[np.triu_indices(n, k=1)] = NEG_INF
    return m


def multi_head_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    n_heads: int,
    mask: Optional[np.ndarray] = None,
    w_out: Optional[Tensor] = None,
    b_out: Optional[Tensor] = None,
) -> Tensor:
    """Scaled dot-product attention over (seq, dim) inputs, per head.

    Masked positions receive exactly zero attention weight. When `w_out` is
    given the concatenated heads are linearly projected.
    """
    length, dim = q.shape
    if dim % n_heads != 0:
        raise ValueError(f"dim {dim} not divisible by {n_heads} heads")
    if k.shape != v.shape or k.shape[1] != dim:
        raise ValueError(f"shape mismatch: q{q.shape} k{k.shape} v{v.shape}")
    head_dim = dim // n_heads
    kv_len = k.shape[0]

    def split(t, n):  # (n, dim) -> (heads, n, head_dim)
        return transpose(reshape(t, (n, n_heads, head_dim)), (1, 0, 2))

    qh, kh, vh = split(q, length), split(k, kv_len), split(v, kv_len)
    scores = mul(matmul(qh, transpose(kh, (0, 2, 1))), 1.0 / np.sqrt(head_dim))
    if mask is not None:
        scores = add(scores, np.asarray(mask, dtype=np.float64))
    weights = softmax(scores, axis=-1)
    ctx = matmul(weights, vh)  # (heads, length, head_dim)
    merged = reshape(transpose(ctx, (1, 0, 2)), (length, dim))
    if w_out is not None:
        merged = matmul(merged, w_out)
        if b_out is not None:
            merged = add(merged, b_out)
    return merged


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log-likelihood of `target` under softmax(logits); 1-D logits."""
    ls = log_softmax(logits, axis=-1)
    picked = gather_pairs(reshape(ls, (1, -1)), [0], [int(target)])
    return neg(sum_(picked))
