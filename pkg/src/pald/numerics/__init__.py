"""Numeric substrate: tensors, reverse-mode differentiation, layers, AdamW."""

from .tensor import (
    Tensor,
    add,
    autodiff_gradient,
    concat_cols,
    concat_rows,
    gru_cell,
    layer_norm,
    matmul,
    mul,
    scale,
    sigmoid,
    slice_cols,
    tanh,
    tmean,
    tsum,
)
from .layers import GRUCell, MLP, init_dense, time_features
from .optim import AdamW, warmup_cosine_lr
from .rng import spawn_seed, stream

__all__ = [
    "Tensor", "add", "autodiff_gradient", "concat_cols", "concat_rows",
    "gru_cell", "layer_norm", "matmul", "mul", "scale", "sigmoid",
    "slice_cols", "tanh", "tmean", "tsum", "GRUCell", "MLP", "init_dense",
    "time_features", "AdamW", "warmup_cosine_lr", "spawn_seed", "stream",
]
