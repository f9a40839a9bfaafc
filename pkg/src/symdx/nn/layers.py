"""Parameter containers for the transformer stacks.

Initialization: weights from N(0, 0.02), biases zero, layer-norm gain 1 and
bias 0. Layers register their parameters in a stable declared order so the
checkpoint format and the optimizer see a reproducible sequence.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from . import tensor as T
from .tensor import Tensor

INIT_STD = 0.02


class ParamStore:
    """Ordered name -> parameter registry shared by a whole model."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._params: dict[str, Tensor] = {}

    def normal(self, name: str, shape: tuple[int, ...], std: float = INIT_STD) -> Tensor:
        return self._register(name, self.rng.normal(0.0, std, size=shape))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._register(name, np.zeros(shape))

    def ones(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._register(name, np.ones(shape))

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        p = Tensor(data, requires_grad=True)
        self._params[name] = p
        return p

    def items(self) -> list[tuple[str, Tensor]]:
        return list(self._params.items())

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __len__(self) -> int:
        return len(self._params)


class Linear:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int):
        self.w = store.normal(f"{name}.w", (d_in, d_out))
        self.b = store.zeros(f"{name}.b", (d_out,))

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.w), self.b)


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int):
        self.gain = store.ones(f"{name}.gain", (dim,))
        self.bias = store.zeros(f"{name}.bias", (dim,))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias)


class SelfAttention:
    """Multi-head self-attention with learned q/k/v/output projections."""

    def __init__(self, store: ParamStore, name: str, dim: int, n_heads: int):
        self.n_heads = n_heads
        self.q = Linear(store, f"{name}.q", dim, dim)
        self.k = Linear(store, f"{name}.k", dim, dim)
        self.v = Linear(store, f"{name}.v", dim, dim)
        self.out_w = store.normal(f"{name}.out.w", (dim, dim))
        self.out_b = store.zeros(f"{name}.out.b", (dim,))

    def __call__(self, x: Tensor, mask: Optional[np.ndarray]) -> Tensor:
        return T.multi_head_attention(
            self.q(x), self.k(x), self.v(x),
            self.n_heads, mask=mask, w_out=self.out_w, b_out=self.out_b,
        )


class FeedForward:
    def __init__(self, store: ParamStore, name: str, dim: int, hidden: int):
        self.inner = Linear(store, f"{name}.inner", dim, hidden)
        self.outer = Linear(store, f"{name}.outer", hidden, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(T.gelu(self.inner(x)))


class TransformerBlock:
    """Pre-layer-norm residual block: x + attn(ln(x)), then x + ff(ln(x))."""

    def __init__(self, store: ParamStore, name: str, dim: int, n_heads: int, ff_dim: int):
        self.ln1 = LayerNorm(store, f"{name}.ln1", dim)
        self.attn = SelfAttention(store, f"{name}.attn", dim, n_heads)
        self.ln2 = LayerNorm(store, f"{name}.ln2", dim)
        self.ff = FeedForward(store, f"{name}.ff", dim, ff_dim)

    def __call__(self, x: Tensor, mask: Optional[np.ndarray]) -> Tensor:
        x = T.add(x, self.attn(self.ln1(x), mask))
        return T.add(x, self.ff(self.ln2(x)))


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    """Fixed sin/cos position table: sin on even channels, cos on odd."""
    pos = np.arange(max_len)[:, None]
    i = np.arange(dim // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((max_len, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table
