"""Radial frequency geometry, band energies and the high-to-low (HL) ratio."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInput
from .tensor import dft_centered

DEFAULT_R_SPLIT = 0.25
DEFAULT_EPS = 1e-12


def radial_coordinates(H: int, W: int) -> np.ndarray:
    """Normalized radial frequency over a centered H x W spectrum.

    Each axis is mapped to ``[-1, 1]`` with step ``2/(n-1)`` and the distance
    is divided by its maximum over the grid.  Coordinates are measured from
    the DC bin ``(H//2, W//2)``; on odd axes this is exactly the symmetric
    ``-1 + 2j/(n-1)`` map, on even axes it is that map shifted by half a bin
    so DC gets ``r = 0`` and conjugate bins share a radius.
    """
    if H < 2 or W < 2:
        raise InvalidInput(f"radial grid needs H, W >= 2, got {H}x{W}")
    y = (np.arange(H) - H // 2) / ((H - 1) / 2.0)
    x = (np.arange(W) - W // 2) / ((W - 1) / 2.0)
    d = np.sqrt(y[:, None] ** 2 + x[None, :] ** 2)
    return d / d.max()


@dataclass(frozen=True)
class RadialGrid:
    r: np.ndarray
    r_split: float = DEFAULT_R_SPLIT

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape

    @property
    def low(self) -> np.ndarray:
        return self.r < self.r_split

    @property
    def high(self) -> np.ndarray:
        return self.r >= self.r_split


def radial_grid(H: int, W: int, r_split: float = DEFAULT_R_SPLIT) -> RadialGrid:
    if not 0.0 < r_split < 1.0:
        raise InvalidInput(f"r_split must lie in (0, 1), got {r_split}")
    r = radial_coordinates(H, W)
    r.setflags(write=False)
    return RadialGrid(r=r, r_split=float(r_split))


def power_spectrum(u) -> np.ndarray:
    """|U(u)|^2 on the centered grid; a C x H x W stack is averaged over C."""
    u = np.asarray(u, dtype=np.float64)
    p = np.abs(dft_centered(u)) ** 2
    if p.ndim == 3:
        p = p.mean(axis=0)
    elif p.ndim != 2:
        raise InvalidInput(f"expected H x W or C x H x W, got shape {u.shape}")
    return p


@dataclass(frozen=True)
class BandEnergies:
    e_low: float
    e_high: float
    hl: float
    eps: float

    @property
    def total(self) -> float:
        return self.e_low + self.e_high


def _energies_from_power(p: np.ndarray, grid: RadialGrid) -> tuple[float, float]:
    if p.shape != grid.shape:
        raise InvalidInput(f"field shape {p.shape} does not match grid {grid.shape}")
    return float(p[grid.low].sum()), float(p[grid.high].sum())


def band_energies(u, grid: RadialGrid, eps: float = DEFAULT_EPS) -> BandEnergies:
    if eps < 0:
        raise InvalidInput("eps must be nonnegative")
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-2:] != grid.shape:
        raise InvalidInput(f"field shape {u.shape} does not match grid {grid.shape}")
    e_low, e_high = _energies_from_power(power_spectrum(u), grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        hl = float(np.float64(e_high) / np.float64(e_low + eps))
    return BandEnergies(e_low, e_high, hl, float(eps))


def hl_ratio(u, grid: RadialGrid, eps: float = DEFAULT_EPS) -> float:
    return band_energies(u, grid, eps).hl


@dataclass(frozen=True)
class AssumptionReport:
    ratio1: float
    ratio2: float
    g_high: float
    g_low: float
    hl_uc: float
    hl_y: float
    hl_yhat: float

    def to_dict(self) -> dict:
        return asdict(self)


def assumption_metrics(u_c, y, y_hat, grid: RadialGrid, eps: float = DEFAULT_EPS) -> AssumptionReport:
    """Energy-preservation ratios of a frontend output ``u_c`` against truth ``y``
    and the band gains of the downstream map ``u_c -> y_hat``."""
    bc = band_energies(u_c, grid, eps)
    by = band_energies(y, grid, eps)
    bp = band_energies(y_hat, grid, eps)
    return AssumptionReport(
        ratio1=bc.e_high / (by.e_high + eps),
        ratio2=bc.e_low / (by.e_low + eps),
        g_high=bp.e_high / (bc.e_high + eps),
        g_low=bp.e_low / (bc.e_low + eps),
        hl_uc=bc.hl,
        hl_y=by.hl,
        hl_yhat=bp.hl,
    )
