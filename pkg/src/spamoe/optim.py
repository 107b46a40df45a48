"""Warmup + cosine-with-restarts schedule and a decoupled-weight-decay Adam step."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .errors import InvalidConfig, NumericalError


@dataclass(frozen=True)
class ScheduleConfig:
    base_lr: float = 1e-4
    warmup_epochs: int = 5
    t0: int = 10
    t_mult: int = 2
    gamma: float = 0.3

    def __post_init__(self):
        if self.warmup_epochs < 0 or self.t0 < 1 or self.t_mult < 1 or not 0 < self.gamma <= 1:
            raise InvalidConfig(f"invalid schedule {self}")


def lr_at(epoch: int, s: ScheduleConfig) -> float:
    """Linear warmup, then cosine cycles of length ``t0 * t_mult**i`` whose peak
    decays as ``base_lr * gamma**i``."""
    if epoch < 0:
        raise InvalidConfig("epoch must be >= 0")
    if epoch < s.warmup_epochs:
        return s.base_lr * (epoch + 1) / s.warmup_epochs
    t = epoch - s.warmup_epochs
    i, length = 0, s.t0
    while t >= length:
        t -= length
        i += 1
        length *= s.t_mult
    peak = s.base_lr * s.gamma ** i
    return max(0.0, peak * (1.0 + math.cos(math.pi * t / length)) / 2.0)


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params: dict, grads: dict, state: AdamState, lr: float, weight_decay: float = 0.0,
                   betas=(0.9, 0.999), eps: float = 1e-8) -> tuple[dict, AdamState]:
    """One AdamW update, in place on ``params``; returns ``(params, state)``."""
    b1, b2 = betas
    for name, g in grads.items():
        if not torch.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for {name!r} at step {state.step + 1}")
    state.step += 1
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            m = state.m.get(name)
            if m is None:
                m = state.m[name] = torch.zeros_like(p)
                state.v[name] = torch.zeros_like(p)
            v = state.v[name]
            m.mul_(b1).add_(g, alpha=1.0 - b1)
            v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
            if weight_decay:
                p.mul_(1.0 - lr * weight_decay)
            denom = (v / bc2).sqrt_().add_(eps)
            p.addcdiv_(m / bc1, denom, value=-lr)
    return params, state
