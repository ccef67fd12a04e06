"""Training losses: cross entropy, BCE with logits, mean squared error."""

from __future__ import annotations

import numpy as np

from gode.tensor.core import ShapeMismatchError, Tensor


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer class targets.

    ``logits`` is (N, C) with targets of length N, or (C,) with a single
    integer target.
    """
    if logits.ndim == 1:
        logits2 = logits.data[None, :]
        idx = np.asarray([targets], dtype=np.int64)
    elif logits.ndim == 2:
        logits2 = logits.data
        idx = np.asarray(targets, dtype=np.int64)
        if idx.shape != (logits2.shape[0],):
            raise ShapeMismatchError(
                f"cross_entropy: {idx.shape} targets for {logits2.shape} logits"
            )
    else:
        raise ShapeMismatchError("cross_entropy expects 1-D or 2-D logits")
    n, c = logits2.shape
    if idx.size and (idx.min() < 0 or idx.max() >= c):
        raise IndexError("class index out of range")

    shifted = logits2 - logits2.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    nll = logsumexp - shifted[np.arange(n), idx]
    out_data = nll.mean()

    def backward_fn(grad):
        if logits.requires_grad:
            soft = np.exp(shifted - logsumexp[:, None])
            soft[np.arange(n), idx] -= 1.0
            g = float(grad) * soft / n
            logits._accumulate(g[0] if logits.ndim == 1 else g)

    return Tensor(out_data, _parents=(logits,), _backward_fn=backward_fn, _op="cross_entropy")


def bce_with_logits(logits: Tensor, targets, reduction: str = "mean") -> Tensor:
    """Binary cross entropy on logits: max(x,0) - x*t + log(1 + exp(-|x|))."""
    t = np.asarray(targets, dtype=np.float64)
    x = logits.data
    if t.shape != x.shape:
        raise ShapeMismatchError(f"bce_with_logits: {x.shape} logits vs {t.shape} targets")
    elementwise = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    if reduction == "mean":
        out_data = elementwise.mean() if elementwise.size else 0.0
        scale = 1.0 / max(elementwise.size, 1)
    elif reduction == "sum":
        out_data = elementwise.sum()
        scale = 1.0
    else:
        raise ValueError(f"unknown reduction {reduction!r}")

    sig = np.empty_like(x)
    pos = x >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    sig[~pos] = ex / (1.0 + ex)

    def backward_fn(grad):
        if logits.requires_grad:
            logits._accumulate(float(grad) * scale * (sig - t))

    return Tensor(out_data, _parents=(logits,), _backward_fn=backward_fn, _op="bce_with_logits")


def mse(pred: Tensor, target) -> Tensor:
    t = np.asarray(target, dtype=np.float64)
    if t.shape != pred.shape:
        raise ShapeMismatchError(f"mse: {pred.shape} vs {t.shape}")
    diff = pred.data - t
    out_data = (diff * diff).mean() if diff.size else 0.0

    def backward_fn(grad):
        if pred.requires_grad:
            pred._accumulate(float(grad) * 2.0 * diff / max(diff.size, 1))

    return Tensor(out_data, _parents=(pred,), _backward_fn=backward_fn, _op="mse")
