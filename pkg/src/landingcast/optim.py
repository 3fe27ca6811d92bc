"""AdamW with decoupled weight decay, plus the cyclic learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor

__all__ = ["AdamWState", "adamw_step", "LrSchedule", "lr_at", "NonFiniteGradientError"]


class NonFiniteGradientError(RuntimeError):
    """A parameter's gradient contains NaN/Inf; the step is refused."""


@dataclass
class AdamWState:
    """Per-parameter first/second moment buffers and the shared step counter."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params: dict[str, Tensor], state: AdamWState, lr: float) -> None:
    """One AdamW update over `params` (insertion order, deterministic).

    Decoupled decay p *= (1 - lr*wd) first, then the bias-corrected Adam
    update from each parameter's `.grad`. Parameters with `grad is None`
    are skipped; a non-finite gradient aborts before any mutation.
    """
    if lr <= 0.0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    live = []
    for name, p in params.items():
        if p.grad is None:
            continue
        if p.grad.shape != p.data.shape:
            raise ValueError(
                f"gradient shape {p.grad.shape} does not match parameter "
                f"'{name}' of shape {p.data.shape}"
            )
        if not np.isfinite(p.grad).all():
            raise NonFiniteGradientError(f"non-finite gradient for parameter '{name}'")
        live.append((name, p))

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, p in live:
        g = p.grad
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        if state.weight_decay:
            p.data *= 1.0 - lr * state.weight_decay
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    state.step = t


@dataclass
class LrSchedule:
    """Decay from lr_max to lr_min within each cycle, then reset to lr_max."""

    lr_max: float = 1e-4
    lr_min: float = 1e-6
    cycle_epochs: int = 100
    shape: str = "cosine"  # or "linear"


def lr_at(epoch: int, sched: LrSchedule) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    e = epoch % sched.cycle_epochs
    frac = e / sched.cycle_epochs
    if sched.shape == "cosine":
        w = 0.5 * (1.0 + math.cos(math.pi * frac))
    elif sched.shape == "linear":
        w = 1.0 - frac
    else:
        raise ValueError(f"unknown schedule shape {sched.shape!r}")
    return sched.lr_min + (sched.lr_max - sched.lr_min) * w
