"""Operator experts (FNO, MNO, LNO) and gated fusion.

All experts map ``[B, C, H, W] -> [B, C, H, W]``.  Layers are separated by
SiLU except after the last one; ``linear=True`` drops every nonlinearity,
which makes each expert homogeneous of degree one.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import InvalidConfig, InvalidInput

DTYPE = torch.float64


def _act(x: torch.Tensor, linear: bool) -> torch.Tensor:
    return x if linear else F.silu(x)


def _pointwise(c_in: int, c_out: int) -> nn.Conv2d:
    return nn.Conv2d(c_in, c_out, kernel_size=1, dtype=DTYPE)


def retained_rows(H: int, modes_h: int) -> list[int]:
    """Row indices of an unshifted rfft2 spectrum kept by ``modes_h``: the lowest
    ``modes_h`` nonnegative and negative frequencies, without duplicates."""
    return sorted(set(range(modes_h)) | set(range(H - modes_h, H)))


class SpectralConv2d(nn.Module):
    """Channel-mixing complex multiply on the retained low modes, zero elsewhere.

    Weights live as real ``[..., 2]`` pairs so every parameter is real-valued.
    """

    def __init__(self, channels: int, modes: tuple[int, int], grid: tuple[int, int]):
        super().__init__()
        H, W = grid
        mh, mw = modes
        if not (1 <= mh <= math.ceil(H / 2) and 1 <= mw <= W // 2 + 1):
            raise InvalidConfig(
                f"modes {modes} exceed the grid {grid}: need modes_h <= {math.ceil(H / 2)}, "
                f"modes_w <= {W // 2 + 1}"
            )
        self.grid = (H, W)
        self.modes = (mh, mw)
        self.register_buffer("rows", torch.tensor(retained_rows(H, mh)), persistent=False)
        scale = 1.0 / (channels * channels)
        shape = (channels, channels, len(self.rows), mw, 2)
        self.weight = nn.Parameter(scale * torch.rand(shape, dtype=DTYPE))

    def set_identity(self) -> None:
        with torch.no_grad():
            self.weight.zero_()
            c = self.weight.shape[0]
            self.weight[torch.arange(c), torch.arange(c), ..., 0] = 1.0

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        H, W = x.shape[-2:]
        if (H, W) != self.grid:
            raise InvalidInput(f"spectral layer built for {self.grid}, got {(H, W)}")
        mw = self.modes[1]
        xf = torch.fft.rfft2(x)
        w = torch.view_as_complex(self.weight)
        kept = xf[:, :, self.rows, :mw]
        out = torch.zeros_like(xf)
        out[:, :, self.rows, :mw] = torch.einsum("bixy,ioxy->boxy", kept, w)
        return torch.fft.irfft2(out, s=(H, W))


class FNOExpert(nn.Module):
    def __init__(self, channels: int, grid: tuple[int, int], modes=(16, 16), layers: int = 2,
                 linear: bool = False):
        super().__init__()
        if layers < 1:
            raise InvalidConfig("FNO needs at least one layer")
        self.linear = linear
        self.spectral = nn.ModuleList(SpectralConv2d(channels, tuple(modes), grid) for _ in range(layers))
        self.skip = nn.ModuleList(_pointwise(channels, channels) for _ in range(layers))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n = len(self.spectral)
        for i, (spec, skip) in enumerate(zip(self.spectral, self.skip)):
            x = spec(x) + skip(x)
            if i < n - 1:
                x = _act(x, self.linear)
        return x


def scaled_size(n: int, factor: float) -> int:
    return max(1, int(math.floor(n * factor + 0.5)))


class MNOExpert(nn.Module):
    """Sum over scale branches of ``phi_s(K_s * down_s(x))`` resampled back to H x W.

    Down-sampling is area averaging, up-sampling is corner-aligned bilinear,
    and ``K_s`` is a zero-padded odd-size convolution (cross-correlation form).
    """

    def __init__(self, channels: int, grid: tuple[int, int], scales: Sequence[float] = (1.0, 0.6, 0.3),
                 kernel_size: int = 3, layers: int = 2, linear: bool = False):
        super().__init__()
        if kernel_size % 2 == 0:
            raise InvalidConfig("MNO kernel size must be odd")
        if layers < 1:
            raise InvalidConfig("MNO needs at least one layer")
        for f in scales:
            if not 0.0 < f <= 1.0:
                raise InvalidConfig(f"scale factor {f} outside (0, 1]")
            h, w = scaled_size(grid[0], f), scaled_size(grid[1], f)
            if h < kernel_size or w < kernel_size:
                raise InvalidConfig(f"scale {f} gives a {h}x{w} grid smaller than kernel {kernel_size}")
        self.grid = tuple(grid)
        self.scales = tuple(float(f) for f in scales)
        self.linear = linear
        pad = kernel_size // 2
        self.kernels = nn.ModuleList(
            nn.ModuleList(nn.Conv2d(channels, channels, kernel_size, padding=pad, dtype=DTYPE) for _ in self.scales)
            for _ in range(layers)
        )
        self.phis = nn.ModuleList(
            nn.ModuleList(_pointwise(channels, channels) for _ in self.scales) for _ in range(layers)
        )

    def _branch(self, x, factor, conv, phi):
        H, W = x.shape[-2:]
        if factor == 1.0:
            return phi(conv(x))
        small = F.adaptive_avg_pool2d(x, (scaled_size(H, factor), scaled_size(W, factor)))
        y = phi(conv(small))
        return F.interpolate(y, size=(H, W), mode="bilinear", align_corners=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n = len(self.kernels)
        for i, (convs, phis) in enumerate(zip(self.kernels, self.phis)):
            x = sum(self._branch(x, f, c, p) for f, c, p in zip(self.scales, convs, phis))
            if i < n - 1:
                x = _act(x, self.linear)
        return x


class LNOExpert(nn.Module):
    """Local integral ``sum_{|y - x| <= rho} K(y - x) z(y)`` per channel, then a
    channel mix.  The stencil is shared across positions within a layer."""

    def __init__(self, channels: int, grid: tuple[int, int], radius: int = 1, layers: int = 2,
                 linear: bool = False):
        super().__init__()
        if radius < 1:
            raise InvalidConfig("LNO radius must be >= 1")
        if 2 * radius + 1 > min(grid):
            raise InvalidConfig(f"radius {radius} too large for grid {grid}")
        self.radius = radius
        self.linear = linear
        size = 2 * radius + 1
        self.stencils = nn.ParameterList(
            nn.Parameter((torch.rand(channels, 1, size, size, dtype=DTYPE) - 0.5) * (2.0 / size))
            for _ in range(layers)
        )
        self.mix = nn.ModuleList(_pointwise(channels, channels) for _ in range(layers))

    def local_integral(self, x: torch.Tensor, stencil: torch.Tensor) -> torch.Tensor:
        return F.conv2d(x, stencil, padding=self.radius, groups=x.shape[1])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n = len(self.stencils)
        for i, (st, mix) in enumerate(zip(self.stencils, self.mix)):
            x = mix(self.local_integral(x, st))
            if i < n - 1:
                x = _act(x, self.linear)
        return x


def moe_fuse(alpha, outputs, readout: nn.Module | None = None) -> torch.Tensor:
    """``sum_e alpha_e * outputs[e]`` over the selected experts, optionally read out.

    ``outputs`` must hold exactly one tensor per weight, in the same order.
    """
    alpha = torch.as_tensor(alpha, dtype=torch.float64)
    outputs = list(outputs)
    if alpha.ndim != 1 or len(outputs) != alpha.shape[0]:
        raise InvalidInput(f"{alpha.numel()} gate weights but {len(outputs)} expert outputs")
    if any(o is None for o in outputs):
        raise InvalidInput("missing expert output")
    outs = [torch.as_tensor(o, dtype=torch.float64) for o in outputs]
    shape = outs[0].shape
    if any(o.shape != shape for o in outs):
        raise InvalidInput("expert outputs disagree in shape")
    fused = sum(a * o for a, o in zip(alpha, outs))
    if readout is None:
        return fused
    if fused.ndim == 3:
        return readout(fused[None])[0, 0]
    if fused.ndim == 4:
        return readout(fused)[:, 0]
    raise InvalidInput("readout expects [C, H, W] or [B, C, H, W] expert outputs")


def build_expert(kind: str, channels: int, grid, *, layers: int = 2, linear: bool = False,
                 fno_modes=(16, 16), mno_scales=(1.0, 0.6, 0.3), mno_kernel: int = 3,
                 lno_radius: int = 1) -> nn.Module:
    """Factory used by the model; FNO modes are clipped to what the grid holds."""
    if kind == "fno":
        H, W = grid
        modes = (min(fno_modes[0], math.ceil(H / 2)), min(fno_modes[1], W // 2 + 1))
        return FNOExpert(channels, grid, modes, layers, linear)
    if kind == "mno":
        return MNOExpert(channels, grid, mno_scales, mno_kernel, layers, linear)
    if kind == "lno":
        return LNOExpert(channels, grid, lno_radius, layers, linear)
    raise InvalidConfig(f"unknown expert kind {kind!r}")


EXPERT_KINDS = ("fno", "mno", "lno")


def count_params(module: nn.Module) -> int:
    return int(sum(np.prod(p.shape) for p in module.parameters()))
