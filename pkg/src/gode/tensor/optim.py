"""Adam with bias correction, plain SGD, and the warmup/decay schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from gode.tensor.core import Tensor


class MissingGradError(ValueError):
    """A parameter has no gradient; run backward() before stepping."""


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> None:
    """One Adam update over every parameter; grads are consumed (reset)."""
    for name, p in params.items():
        if p.grad is None:
            raise MissingGradError(f"parameter {name!r} has no gradient")
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = p.grad
        if weight_decay:
            g = g + weight_decay * p.data
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.grad = None


def sgd_step(params: Mapping[str, Tensor], lr: float) -> None:
    for name, p in params.items():
        if p.grad is None:
            raise MissingGradError(f"parameter {name!r} has no gradient")
        p.data -= lr * p.grad
        p.grad = None


@dataclass(frozen=True)
class NoamSchedule:
    """lr(step) = factor * dim^-1/2 * min(step^-1/2, step * warmup^-3/2).

    The rate rises linearly for ``warmup_steps`` steps, peaks there, and
    decays as 1/sqrt(step) afterwards, never dropping below ``floor``.
    """

    model_dim: int
    warmup_steps: int
    factor: float = 1.0
    floor: float = 0.0

    def lr(self, step: int) -> float:
        if step < 1:
            raise ValueError("schedule steps are 1-based")
        rate = (
            self.factor
            * self.model_dim**-0.5
            * min(step**-0.5, step * self.warmup_steps**-1.5)
        )
        if step > self.warmup_steps:
            rate = max(rate, self.floor)
        return rate

    @classmethod
    def from_rates(
        cls, model_dim: int, warmup_steps: int, max_lr: float, final_lr: float
    ) -> "NoamSchedule":
        """Pick the factor so the peak rate (at step == warmup) equals max_lr."""
        factor = max_lr * model_dim**0.5 * warmup_steps**0.5
        return cls(model_dim, warmup_steps, factor, final_lr)
