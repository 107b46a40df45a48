"""Observation reshaping, a trainable patch-encoder, and the bilinear frontend.

The encoder is a small stand-in honoring the ``T x (N_s*N_r) -> C x H x W``
shape contract: non-overlapping patch embedding, learned row/column token
resampling onto the output token grid, residual token-mixing layers, and a
pixel-shuffle head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidConfig, InvalidInput
from .metrics import RadialGrid

DTYPE = torch.float64


def reshape_shots(x):
    """``[..., N_s, T, N_r] -> [..., T, N_s*N_r]``, shot 0's receivers first."""
    if x.ndim < 3:
        raise InvalidInput(f"observation needs [..., N_s, T, N_r], got shape {tuple(x.shape)}")
    ns, t, nr = x.shape[-3:]
    return x.swapaxes(-3, -2).reshape(*x.shape[:-3], t, ns * nr)


def unreshape_shots(xp, n_shots: int):
    t, total = xp.shape[-2:]
    if total % n_shots:
        raise InvalidInput(f"{total} columns do not split into {n_shots} shots")
    return xp.reshape(*xp.shape[:-2], t, n_shots, total // n_shots).swapaxes(-3, -2)


def auto_patch(H: int, W: int, limit: int = 4) -> int:
    g = math.gcd(H, W)
    return max(d for d in range(1, limit + 1) if g % d == 0)


def linear_resample_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Corner-aligned 1D linear interpolation as an ``n_out x n_in`` matrix."""
    m = np.zeros((n_out, n_in))
    if n_in == 1:
        m[:, 0] = 1.0
        return m
    pos = np.linspace(0.0, n_in - 1, n_out) if n_out > 1 else np.zeros(1)
    lo = np.clip(np.floor(pos).astype(int), 0, n_in - 2)
    frac = pos - lo
    m[np.arange(n_out), lo] += 1.0 - frac
    m[np.arange(n_out), lo + 1] += frac
    return m


class ProxyEncoder(nn.Module):
    def __init__(self, in_shape: tuple[int, int], out_shape: tuple[int, int], channels: int = 8,
                 patch: int | None = None, out_patch: int | None = None, dim: int = 16,
                 layers: int = 2):
        super().__init__()
        H, W = out_shape
        q = out_patch or auto_patch(H, W)
        p = patch or q
        if H % q or W % q:
            raise InvalidConfig(f"output {H}x{W} not divisible by output patch {q}")
        T, R = in_shape
        self.in_shape = (T, R)
        self.out_shape = (H, W)
        self.channels = channels
        self.patch, self.out_patch = p, q
        self.tp, self.rp = math.ceil(T / p), math.ceil(R / p)
        self.hp, self.wp = H // q, W // q
        self.embed = nn.Linear(p * p, dim, dtype=DTYPE)
        self.row_map = nn.Parameter(torch.from_numpy(linear_resample_matrix(self.hp, self.tp)))
        self.col_map = nn.Parameter(torch.from_numpy(linear_resample_matrix(self.wp, self.rp)))
        self.mix_rows = nn.ParameterList(
            nn.Parameter(torch.eye(self.hp, dtype=DTYPE)) for _ in range(layers))
        self.mix_cols = nn.ParameterList(
            nn.Parameter(torch.eye(self.wp, dtype=DTYPE)) for _ in range(layers))
        self.mix_channels = nn.ModuleList(nn.Linear(dim, dim, dtype=DTYPE) for _ in range(layers))
        self.head = nn.Linear(dim, channels * q * q, dtype=DTYPE)

    def forward(self, xp: torch.Tensor) -> torch.Tensor:
        """``[B, T, R] -> [B, C, H, W]`` (a 2D input gives ``[C, H, W]``)."""
        squeeze = xp.ndim == 2
        if squeeze:
            xp = xp[None]
        if tuple(xp.shape[-2:]) != self.in_shape:
            raise InvalidConfig(f"encoder built for input {self.in_shape}, got {tuple(xp.shape[-2:])}")
        B = xp.shape[0]
        p = self.patch
        # zero-pad bottom/right up to whole patches
        xp = F.pad(xp, (0, self.rp * p - xp.shape[-1], 0, self.tp * p - xp.shape[-2]))
        tokens = xp.reshape(B, self.tp, p, self.rp, p).permute(0, 1, 3, 2, 4).reshape(B, self.tp, self.rp, p * p)
        h = self.embed(tokens)  # [B, tp, rp, D]
        h = torch.einsum("ht,btrd,wr->bhwd", self.row_map, h, self.col_map)
        for mr, mc, mix in zip(self.mix_rows, self.mix_cols, self.mix_channels):
            spatial = torch.einsum("ij,bjkd,lk->bild", mr, h, mc)
            h = h + F.silu(mix(spatial))
        q, C = self.out_patch, self.channels
        out = self.head(h).reshape(B, self.hp, self.wp, C, q, q)
        out = out.permute(0, 3, 1, 4, 2, 5).reshape(B, C, self.hp * q, self.wp * q)
        return out[0] if squeeze else out


def proxy_encode(xp, p: ProxyEncoder) -> torch.Tensor:
    return p(torch.as_tensor(xp, dtype=DTYPE))


def interp_resize(u, H: int, W: int):
    """Corner-aligned bilinear resize of the last two axes; numpy in, numpy out."""
    if H < 2 or W < 2:
        raise InvalidInput(f"target size must be >= 2, got {H}x{W}")
    is_np = not isinstance(u, torch.Tensor)
    t = torch.as_tensor(np.asarray(u, dtype=np.float64) if is_np else u)
    lead = t.shape[:-2]
    flat = t.reshape(-1, 1, *t.shape[-2:])
    out = F.interpolate(flat, size=(H, W), mode="bilinear", align_corners=True)
    out = out.reshape(*lead, H, W)
    return out.numpy() if is_np else out


def down_up(u, mid: tuple[int, int]):
    H, W = u.shape[-2:]
    return interp_resize(interp_resize(u, *mid), H, W)


@dataclass(frozen=True)
class InterpResponse:
    response: np.ndarray
    alpha_hat: float
    beta_hat: float

    @property
    def bound(self) -> float:
        return (self.alpha_hat / self.beta_hat) ** 2


def measure_interp_response(H: int, W: int, H_mid: int, W_mid: int, grid: RadialGrid,
                            chunk: int = 512) -> InterpResponse:
    """Diagonal response of ``up(down(.))`` measured with unit complex exponentials.

    For each centered frequency w the probe ``e_w`` is pushed through the
    resize cycle and ``|<e_w, I(e_w)>| / (H W)`` is recorded.
    """
    if grid.shape != (H, W):
        raise InvalidInput(f"grid {grid.shape} does not match {H}x{W}")
    if H_mid < 2 or W_mid < 2 or (H_mid >= H and W_mid >= W):
        raise InvalidConfig(f"mid size {H_mid}x{W_mid} is not a lossy cycle for {H}x{W}")
    ii = np.arange(H)[:, None]
    jj = np.arange(W)[None, :]
    fy = np.arange(H) - H // 2
    fx = np.arange(W) - W // 2
    freqs = [(a, b) for a in range(H) for b in range(W)]
    resp = np.empty(H * W)
    for start in range(0, len(freqs), chunk):
        block = freqs[start:start + chunk]
        probes = np.stack([np.exp(2j * np.pi * (fy[a] * ii / H + fx[b] * jj / W)) for a, b in block])
        out = down_up(probes.real, (H_mid, W_mid)) + 1j * down_up(probes.imag, (H_mid, W_mid))
        inner = np.einsum("nij,nij->n", probes.conj(), out)
        resp[start:start + len(block)] = np.abs(inner) / (H * W)
    resp = resp.reshape(H, W)
    return InterpResponse(resp, float(resp[grid.high].max()), float(resp[grid.low].min()))
