"""Minimal reverse-mode autodiff with the layers, losses, and optimizer
the training stages need. Values are float64 numpy arrays; any non-finite
result raises immediately instead of contaminating a run."""

from gode.tensor.core import (
    GraphReusedError,
    NonFiniteError,
    NotScalarError,
    ShapeMismatchError,
    Tensor,
    abs_,
    add,
    backward,
    concat,
    dot,
    dropout,
    embedding_lookup,
    matmul,
    mean_pool,
    mul,
    prelu,
    relu,
    reshape,
    row_sum,
    segment_mean,
    segment_sum,
    sigmoid,
    softmax,
    softplus,
    sqrt_,
    sum_,
)
from gode.tensor.losses import bce_with_logits, cross_entropy, mse
from gode.tensor.optim import AdamState, MissingGradError, NoamSchedule, adam_step, sgd_step
from gode.tensor.checkpoint import (
    CheckpointFormatError,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Tensor",
    "NonFiniteError",
    "NotScalarError",
    "GraphReusedError",
    "ShapeMismatchError",
    "MissingGradError",
    "add",
    "mul",
    "matmul",
    "concat",
    "mean_pool",
    "relu",
    "prelu",
    "sigmoid",
    "softmax",
    "softplus",
    "embedding_lookup",
    "dot",
    "row_sum",
    "sum_",
    "abs_",
    "sqrt_",
    "reshape",
    "segment_sum",
    "segment_mean",
    "dropout",
    "backward",
    "cross_entropy",
    "bce_with_logits",
    "mse",
    "AdamState",
    "NoamSchedule",
    "adam_step",
    "sgd_step",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointFormatError",
]
