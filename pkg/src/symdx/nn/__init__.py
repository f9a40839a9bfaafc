"""Minimal dense numerical engine with reverse-mode differentiation."""

from .tensor import (
    NEG_INF,
    GraphError,
    Tensor,
    add,
    causal_mask,
    cross_entropy,
    embedding,
    gather_pairs,
    gelu,
    layer_norm,
    log_softmax,
    matmul,
    mean,
    mul,
    multi_head_attention,
    neg,
    no_grad,
    pow_const,
    reshape,
    softmax,
    sum_,
    take_rows,
    transpose,
)
from .layers import (
    FeedForward,
    LayerNorm,
    Linear,
    ParamStore,
    SelfAttention,
    TransformerBlock,
    sinusoidal_positions,
)
from .optim import Adam, OptimizerState, clip_global_norm, init_state, optimizer_step

__all__ = [
    "NEG_INF",
    "GraphError",
    "Tensor",
    "add",
    "causal_mask",
    "cross_entropy",
    "embedding",
    "gather_pairs",
    "gelu",
    "layer_norm",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "multi_head_attention",
    "neg",
    "no_grad",
    "pow_const",
    "reshape",
    "softmax",
    "sum_",
    "take_rows",
    "transpose",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "ParamStore",
    "SelfAttention",
    "TransformerBlock",
    "sinusoidal_positions",
    "Adam",
    "OptimizerState",
    "clip_global_norm",
    "init_state",
    "optimizer_step",
]
