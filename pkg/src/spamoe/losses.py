"""Composite training loss.

Terms (each off when its weight is zero):

* ``mae``      mean |y_hat - y|
* ``grad``     L1 between forward-difference gradients, rows plus columns
* ``freq``     mean over bins of ||U(y_hat)| - |U(y)|| (unnormalized DFT)
* ``balance``  squared coefficient of variation of per-expert importance
* ``router_l1`` / ``router_l2``  mean |g| and mean g^2 over router logits
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch

from .errors import InvalidInput
from .tensor import fft_centered


@dataclass(frozen=True)
class LossWeights:
    grad: float = 0.15
    freq: float = 0.10
    balance: float = 0.20
    router_l1: float = 0.60
    router_l2: float = 0.40

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise InvalidInput(f"loss weight {k} must be >= 0")


@dataclass
class LossBreakdown:
    total: torch.Tensor
    terms: dict[str, float]


def gradient_l1(y_hat: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    dy = lambda t: t[..., 1:, :] - t[..., :-1, :]  # noqa: E731
    dx = lambda t: t[..., :, 1:] - t[..., :, :-1]  # noqa: E731
    return (dy(y_hat) - dy(y)).abs().mean() + (dx(y_hat) - dx(y)).abs().mean()


def fourier_magnitude_l1(y_hat: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    return (fft_centered(y_hat).abs() - fft_centered(y).abs()).abs().mean()


def cv_squared(importance: torch.Tensor) -> torch.Tensor:
    mean = importance.mean()
    if mean == 0:
        return importance.sum() * 0.0
    return importance.var(unbiased=False) / mean ** 2


def composite_loss(y_hat, y, router_stats, w: LossWeights = LossWeights()) -> LossBreakdown:
    """``router_stats`` needs ``importance`` and ``logits`` (a :class:`RouterStats`)."""
    y_hat = torch.as_tensor(y_hat, dtype=torch.float64)
    y = torch.as_tensor(y, dtype=torch.float64)
    if y_hat.shape != y.shape:
        raise InvalidInput(f"prediction {tuple(y_hat.shape)} vs target {tuple(y.shape)}")
    g = router_stats.logits
    parts = {
        "mae": (y_hat - y).abs().mean(),
        "grad": gradient_l1(y_hat, y),
        "freq": fourier_magnitude_l1(y_hat, y),
        "balance": cv_squared(router_stats.importance),
        "router_l1": g.abs().mean(),
        "router_l2": (g ** 2).mean(),
    }
    weights = {"mae": 1.0, **asdict(w)}
    total = sum(weights[k] * v for k, v in parts.items() if weights[k] != 0)
    return LossBreakdown(total, {k: float(v.detach()) for k, v in parts.items()})
