"""Concentric frequency-band masks and band decomposition of latent tensors."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
import torch

from .errors import InvalidConfig, InvalidInput
from .metrics import radial_coordinates
from .tensor import fft_centered, ifft_centered

DEFAULT_K = 3
DEFAULT_GAMMA = 20.0
_TIE_TOL = 1e-12


def band_centers(K: int) -> np.ndarray:
    if K < 2:
        raise InvalidConfig(f"need at least two bands, got K={K}")
    return np.arange(K, dtype=np.float64) / (K - 1)


@dataclass(frozen=True)
class BandMaskSet:
    masks: np.ndarray  # (K, H, W), read-only
    centers: np.ndarray
    gamma: float | None
    kind: Literal["soft", "hard"]

    @property
    def K(self) -> int:
        return self.masks.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.masks.shape[1:]

    def as_tensor(self) -> torch.Tensor:
        return torch.from_numpy(np.array(self.masks))


def gaussian_profile(r, center: float, gamma: float):
    return np.exp(-gamma * (np.asarray(r, dtype=np.float64) - center) ** 2)


@lru_cache(maxsize=64)
def gaussian_band_masks(H: int, W: int, K: int = DEFAULT_K, gamma: float = DEFAULT_GAMMA,
                        normalized: bool = False) -> BandMaskSet:
    """Soft masks ``exp(-gamma (r - c_k)^2)`` with ``c_k = k/(K-1)``.

    ``normalized=True`` rescales the stack to sum to one per bin; it is an
    experiment switch and off by default.
    """
    if gamma <= 0:
        raise InvalidConfig(f"gamma must be positive, got {gamma}")
    centers = band_centers(K)
    r = radial_coordinates(H, W)
    masks = np.stack([gaussian_profile(r, c, gamma) for c in centers])
    if normalized:
        masks = masks / masks.sum(axis=0, keepdims=True)
    masks.setflags(write=False)
    centers.setflags(write=False)
    return BandMaskSet(masks, centers, float(gamma), "soft")


def nearest_band(r, K: int) -> np.ndarray:
    """Index of the closest band center; midpoints go to the lower index."""
    centers = band_centers(K)
    r = np.asarray(r, dtype=np.float64)
    d = np.abs(r[..., None] - centers)
    # first index within tolerance of the minimum, so exact ties pick the lower band
    return np.argmax(d <= d.min(axis=-1, keepdims=True) + _TIE_TOL, axis=-1)


@lru_cache(maxsize=64)
def hard_band_masks(H: int, W: int, K: int = DEFAULT_K) -> BandMaskSet:
    centers = band_centers(K)
    idx = nearest_band(radial_coordinates(H, W), K)
    masks = (idx[None] == np.arange(K)[:, None, None]).astype(np.float64)
    masks.setflags(write=False)
    centers.setflags(write=False)
    return BandMaskSet(masks, centers, None, "hard")


def make_masks(H: int, W: int, K: int = DEFAULT_K, gamma: float = DEFAULT_GAMMA,
               kind: str = "soft") -> BandMaskSet:
    if kind == "soft":
        return gaussian_band_masks(H, W, K, float(gamma))
    if kind == "hard":
        return hard_band_masks(H, W, K)
    raise InvalidConfig(f"unknown mask kind {kind!r}")


def decompose(z, masks: BandMaskSet | torch.Tensor) -> torch.Tensor:
    """Split ``z`` (``[..., C, H, W]``) into K band tensors ``[..., K, C, H, W]``.

    Each band is the real inverse transform of the centered spectrum times
    mask k, applied identically to every channel.
    """
    z = torch.as_tensor(z, dtype=torch.float64)
    m = masks.as_tensor() if isinstance(masks, BandMaskSet) else masks
    if z.ndim < 3:
        raise InvalidInput(f"expected [..., C, H, W], got shape {tuple(z.shape)}")
    if tuple(m.shape[-2:]) != tuple(z.shape[-2:]):
        raise InvalidInput(f"mask grid {tuple(m.shape[-2:])} does not match latent {tuple(z.shape[-2:])}")
    zhat = fft_centered(z).unsqueeze(-4)  # [..., 1, C, H, W]
    mk = m.to(z.dtype)[:, None]  # [K, 1, H, W]
    return ifft_centered(zhat * mk).real
