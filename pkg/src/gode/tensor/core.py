"""Reverse-mode autodiff core.

A Tensor wraps a float64 numpy array plus the bookkeeping to run
backpropagation: parent links and a local backward closure recorded at
construction. Calling :func:`backward` on a scalar output walks the
recorded graph once in reverse topological order; walking any part of a
graph twice raises GraphReused.
"""

from __future__ import annotations

import math

import numpy as np


class NonFiniteError(ArithmeticError):
    """A forward or backward value contains NaN or infinity."""


class ShapeMismatchError(ValueError):
    """Operands have incompatible shapes."""


class NotScalarError(ValueError):
    """backward() requires a scalar root."""


class GraphReusedError(RuntimeError):
    """A computation graph was backpropagated more than once."""


def _check_finite(arr: np.ndarray, op: str) -> None:
    # cheap screen: any inf/nan makes the sum non-finite
    if arr.size and not math.isfinite(float(arr.sum())):
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"non-finite values produced by op '{op}'")


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn", "_op", "_spent")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward_fn=None, _op: str = "leaf"):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, _op)
        self.data = arr
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self.grad: np.ndarray | None = None
        self._parents = tuple(_parents)
        self._backward_fn = _backward_fn
        self._op = _op
        self._spent = False

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

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def _accumulate(self, grad: np.ndarray) -> None:
        _check_finite(grad, f"grad:{self._op}")
        if self.grad is None:
            self.grad = grad.astype(np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    # convenience arithmetic (constants or tensors)
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, Tensor(-1.0))

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(_as_tensor(other), -self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not supported; multiply by a reciprocal")
        return mul(self, Tensor(1.0 / float(other)))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def backward(root: Tensor) -> None:
    """Populate ``grad`` on every tensor reachable from ``root``."""
    if root.size != 1:
        raise NotScalarError(f"backward root must be scalar, got shape {root.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    for node in topo:
        if node._parents and node._spent:
            raise GraphReusedError(
                f"graph through op '{node._op}' was already backpropagated"
            )
    for node in topo:
        if node._parents:
            node._spent = True

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward_fn is None or node.grad is None:
            continue
        if not node.requires_grad:
            continue
        node._backward_fn(node.grad)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data + b.data
    except ValueError:
        raise ShapeMismatchError(f"add: {a.shape} vs {b.shape}") from None

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward_fn, _op="add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_data = a.data * b.data
    except ValueError:
        raise ShapeMismatchError(f"mul: {a.shape} vs {b.shape}") from None

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad * a.data, b.shape))

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward_fn, _op="mul")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeMismatchError("matmul supports 1-D and 2-D operands only")
    try:
        out_data = a.data @ b.data
    except ValueError:
        raise ShapeMismatchError(f"matmul: {a.shape} vs {b.shape}") from None

    def backward_fn(grad):
        a2 = a.data if a.ndim == 2 else a.data[None, :]
        b2 = b.data if b.ndim == 2 else b.data[:, None]
        g2 = grad
        if a.ndim == 1 and b.ndim == 1:
            g2 = np.asarray(grad).reshape(1, 1)
        elif a.ndim == 1:
            g2 = grad[None, :]
        elif b.ndim == 1:
            g2 = grad[:, None]
        if a.requires_grad:
            ga = g2 @ b2.T
            a._accumulate(ga[0] if a.ndim == 1 else ga)
        if b.requires_grad:
            gb = a2.T @ g2
            b._accumulate(gb[:, 0] if b.ndim == 1 else gb)

    return Tensor(out_data, _parents=(a, b), _backward_fn=backward_fn, _op="matmul")


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ShapeMismatchError(f"dot: {a.shape} vs {b.shape}")

    def backward_fn(grad):
        if a.requires_grad:
            a._accumulate(grad * b.data)
        if b.requires_grad:
            b._accumulate(grad * a.data)

    return Tensor(a.data @ b.data, _parents=(a, b), _backward_fn=backward_fn, _op="dot")


def concat(tensors: list[Tensor] | tuple[Tensor, ...], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeMismatchError("concat of zero tensors")
    try:
        out_data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatchError(
            f"concat: incompatible shapes {[t.shape for t in tensors]}"
        ) from None
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(grad):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(lo, hi)
                t._accumulate(grad[tuple(index)])

    return Tensor(out_data, _parents=tuple(tensors), _backward_fn=backward_fn, _op="concat")


def reshape(t: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = t.data.reshape(shape)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad.reshape(t.shape))

    return Tensor(out_data, _parents=(t,), _backward_fn=backward_fn, _op="reshape")


def mean_pool(t: Tensor) -> Tensor:
    """Mean over rows (axis 0) of a 2-D tensor."""
    if t.ndim != 2:
        raise ShapeMismatchError(f"mean_pool expects a 2-D tensor, got {t.shape}")
    n = t.shape[0]

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(np.broadcast_to(grad / n, t.shape).copy())

    return Tensor(t.data.mean(axis=0), _parents=(t,), _backward_fn=backward_fn, _op="mean_pool")


def sum_(t: Tensor) -> Tensor:
    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(np.broadcast_to(grad, t.shape).copy())

    return Tensor(t.data.sum(), _parents=(t,), _backward_fn=backward_fn, _op="sum")


def row_sum(t: Tensor) -> Tensor:
    """Sum over the last axis."""
    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(np.repeat(grad[..., None], t.shape[-1], axis=-1))

    return Tensor(t.data.sum(axis=-1), _parents=(t,), _backward_fn=backward_fn, _op="row_sum")


def relu(t: Tensor) -> Tensor:
    mask = t.data > 0

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * mask)

    return Tensor(np.where(mask, t.data, 0.0), _parents=(t,), _backward_fn=backward_fn, _op="relu")


def prelu(t: Tensor, slope: Tensor) -> Tensor:
    """Parametric ReLU with a learnable scalar slope for x < 0."""
    if slope.size != 1:
        raise ShapeMismatchError("prelu slope must be a scalar tensor")
    mask = t.data > 0
    s = float(slope.data)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * np.where(mask, 1.0, s))
        if slope.requires_grad:
            slope._accumulate(
                np.asarray((grad * np.where(mask, 0.0, t.data)).sum()).reshape(slope.shape)
            )

    return Tensor(
        np.where(mask, t.data, s * t.data),
        _parents=(t, slope),
        _backward_fn=backward_fn,
        _op="prelu",
    )


def sigmoid(t: Tensor) -> Tensor:
    out_data = _stable_sigmoid(t.data)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * out_data * (1.0 - out_data))

    return Tensor(out_data, _parents=(t,), _backward_fn=backward_fn, _op="sigmoid")


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(t: Tensor) -> Tensor:
    """log(1 + exp(x)), computed stably."""
    out_data = np.maximum(t.data, 0.0) + np.log1p(np.exp(-np.abs(t.data)))
    sig = _stable_sigmoid(t.data)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * sig)

    return Tensor(out_data, _parents=(t,), _backward_fn=backward_fn, _op="softplus")


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    shifted = t.data - t.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=axis, keepdims=True)

    def backward_fn(grad):
        if t.requires_grad:
            inner = (grad * out_data).sum(axis=axis, keepdims=True)
            t._accumulate(out_data * (grad - inner))

    return Tensor(out_data, _parents=(t,), _backward_fn=backward_fn, _op="softmax")


def abs_(t: Tensor) -> Tensor:
    sign = np.sign(t.data)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * sign)

    return Tensor(np.abs(t.data), _parents=(t,), _backward_fn=backward_fn, _op="abs")


def sqrt_(t: Tensor) -> Tensor:
    out_data = np.sqrt(t.data)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * 0.5 / np.maximum(out_data, 1e-300))

    return Tensor(out_data, _parents=(t,), _backward_fn=backward_fn, _op="sqrt")


def embedding_lookup(table: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeMismatchError("embedding_lookup table must be 2-D")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError("embedding index out of range")

    def backward_fn(grad):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx, grad)
            table._accumulate(acc)

    return Tensor(table.data[idx], _parents=(table,), _backward_fn=backward_fn, _op="embedding_lookup")


def segment_sum(t: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Sum rows of ``t`` into ``num_segments`` buckets."""
    ids = np.asarray(segment_ids, dtype=np.int64)
    if t.ndim != 2 or ids.shape != (t.shape[0],):
        raise ShapeMismatchError("segment_sum expects 2-D values and matching ids")
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise IndexError("segment id out of range")
    out_data = np.zeros((num_segments, t.shape[1]), dtype=np.float64)
    np.add.at(out_data, ids, t.data)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad[ids])

    return Tensor(out_data, _parents=(t,), _backward_fn=backward_fn, _op="segment_sum")


def segment_mean(t: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Mean of rows per segment; empty segments yield zero rows."""
    ids = np.asarray(segment_ids, dtype=np.int64)
    summed = segment_sum(t, ids, num_segments)
    counts = np.bincount(ids, minlength=num_segments).astype(np.float64)
    scale = Tensor((1.0 / np.maximum(counts, 1.0))[:, None])
    return mul(summed, scale)


def dropout(t: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or rate == 0."""
    if not training or rate == 0.0:
        return t
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    mask = (rng.random(t.shape) >= rate) / (1.0 - rate)

    def backward_fn(grad):
        if t.requires_grad:
            t._accumulate(grad * mask)

    return Tensor(t.data * mask, _parents=(t,), _backward_fn=backward_fn, _op="dropout")
