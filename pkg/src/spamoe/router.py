"""Spectral-energy attention router, Top-k gating, and the spatial baseline router.

Every grid location is a token.  The spectral router feeds one feature per
token (the amplitude spectrum); the spatial baseline feeds the C latent
channels at each pixel.  Both share the same attention and aggregation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidConfig, InvalidInput
from .tensor import fft_centered

DEFAULT_DK = 16
DEFAULT_HIDDEN = 32


class RouterParams(nn.Module):
    def __init__(self, n_experts: int, in_channels: int = 1, d_k: int = DEFAULT_DK,
                 hidden: int = DEFAULT_HIDDEN):
        super().__init__()
        if d_k < 1:
            raise InvalidConfig("d_k must be >= 1")
        self.d_k = d_k
        self.n_experts = n_experts
        self.qkv = nn.Linear(in_channels, 3 * d_k, dtype=torch.float64)
        self.agg_hidden = nn.Linear(d_k, hidden, dtype=torch.float64)
        self.agg_out = nn.Linear(hidden, n_experts, dtype=torch.float64)


@dataclass(frozen=True)
class RouterDecision:
    selected: tuple[int, ...]
    alpha: torch.Tensor  # weights aligned with ``selected``
    logits: torch.Tensor

    def dense(self) -> torch.Tensor:
        """Gate weights scattered over all experts (zero where unselected)."""
        out = torch.zeros_like(self.logits)
        return out.index_put((torch.tensor(self.selected),), self.alpha)


def _safe_sqrt(p: torch.Tensor) -> torch.Tensor:
    # exact sqrt forward; zero (not inf) gradient at empty bins
    pos = p > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, p, torch.ones_like(p))), torch.zeros_like(p))


def energy_map(z) -> torch.Tensor:
    """Amplitude ``sqrt(mean_c |U(z_c)|^2)`` of ``[..., C, H, W]`` -> ``[..., H, W]``."""
    z = torch.as_tensor(z, dtype=torch.float64)
    if z.ndim < 3:
        raise InvalidInput(f"expected [..., C, H, W], got shape {tuple(z.shape)}")
    zhat = fft_centered(z)
    power = (zhat.real ** 2 + zhat.imag ** 2).mean(dim=-3)
    return _safe_sqrt(power)


def attend(tokens: torch.Tensor, p: RouterParams) -> torch.Tensor:
    """Single-head attention over ``[..., T, F]`` tokens, then per-token scores
    averaged over tokens to ``[..., N_E]`` logits."""
    q, k, v = p.qkv(tokens).split(p.d_k, dim=-1)
    scores = q @ k.transpose(-1, -2) / math.sqrt(p.d_k)
    attended = torch.softmax(scores, dim=-1) @ v
    per_token = p.agg_out(F.silu(p.agg_hidden(attended)))
    return per_token.mean(dim=-2)


def spectral_attention(A, p: RouterParams) -> torch.Tensor:
    A = torch.as_tensor(A, dtype=torch.float64)
    return attend(A.flatten(-2).unsqueeze(-1), p)


def spectral_logits(z, p: RouterParams) -> torch.Tensor:
    """Router logits for latent ``z``.

    The energy map is divided by H*W before attention, so amplitudes read
    per pixel and the same weight init works at every grid size.
    """
    z = torch.as_tensor(z, dtype=torch.float64)
    H, W = z.shape[-2:]
    return spectral_attention(energy_map(z) / (H * W), p)


def spatial_logits(z, p: RouterParams) -> torch.Tensor:
    z = torch.as_tensor(z, dtype=torch.float64)
    tokens = z.flatten(-2).transpose(-1, -2)  # [..., HW, C]
    return attend(tokens, p)


def top_k(g, k: int) -> tuple[int, ...]:
    """Indices of the k largest logits, ties to the lower index."""
    vals = [float(x) for x in torch.as_tensor(g).reshape(-1)]
    if not 1 <= k <= len(vals):
        raise InvalidConfig(f"top-k needs 1 <= k <= {len(vals)}, got {k}")
    return tuple(sorted(range(len(vals)), key=lambda e: (-vals[e], e))[:k])


def gate(g, k: int) -> RouterDecision:
    g = torch.as_tensor(g, dtype=torch.float64)
    if g.ndim != 1:
        raise InvalidInput("gate takes one logit vector")
    sel = top_k(g.detach(), k)
    alpha = torch.softmax(g[list(sel)], dim=0)
    return RouterDecision(sel, alpha, g)


def spectral_gate(z, p: RouterParams, k: int) -> RouterDecision:
    return gate(spectral_logits(z, p), k)


def spatial_gate(z, p: RouterParams, k: int) -> RouterDecision:
    return gate(spatial_logits(z, p), k)
