"""Deterministic velocity-like fields and toy observation maps."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import InvalidInput
from .metrics import radial_coordinates
from .tensor import dft_centered, idft_centered

Kind = Literal["layered", "curved", "fault", "broadband"]
KINDS = ("layered", "curved", "fault", "broadband")
N_SHOTS = 5


@dataclass(frozen=True)
class FieldSpec:
    kind: Kind = "layered"
    height: int = 70
    width: int = 70
    layers: int = 4
    throw: int = 4  # fault offset, rows
    curvature: float = 3.0  # sinusoid amplitude, rows
    slope: float = -2.0  # broadband radial power-spectrum slope
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown field kind {self.kind!r}")
        if self.height < 2 or self.width < 2:
            raise InvalidInput("field must be at least 2x2")
        if not 1 <= self.layers <= self.height:
            raise InvalidInput(f"layers must be in [1, height], got {self.layers}")
        if not 0 <= self.throw < self.height:
            raise InvalidInput(f"throw must be in [0, height), got {self.throw}")
        if not 0 <= self.curvature <= self.height / 2:
            raise InvalidInput(f"curvature must be in [0, height/2], got {self.curvature}")
        if not -6.0 <= self.slope <= 6.0:
            raise InvalidInput(f"slope must be in [-6, 6], got {self.slope}")


def minmax(u: np.ndarray) -> np.ndarray:
    lo, hi = u.min(), u.max()
    if hi == lo:
        return np.zeros_like(u)
    return (u - lo) / (hi - lo)


def _layer_values(rng, n: int) -> np.ndarray:
    # increasing with depth, distinct by construction
    steps = rng.uniform(0.2, 1.0, n)
    return 1.5 + np.cumsum(steps)


def _layer_index(depth: np.ndarray, H: int, n: int) -> np.ndarray:
    bounds = np.round(np.arange(1, n) * H / n)
    return np.searchsorted(bounds, depth, side="right")


def _layered(spec: FieldSpec, rng) -> np.ndarray:
    vals = _layer_values(rng, spec.layers)
    rows = _layer_index(np.arange(spec.height), spec.height, spec.layers)
    return np.repeat(vals[rows][:, None], spec.width, axis=1)


def _curved(spec: FieldSpec, rng) -> np.ndarray:
    H, W = spec.height, spec.width
    vals = _layer_values(rng, spec.layers)
    wavelength = rng.uniform(0.5, 1.5) * W
    phase = rng.uniform(0, 2 * np.pi)
    shift = spec.curvature * np.sin(2 * np.pi * np.arange(W) / wavelength + phase)
    depth = np.arange(H)[:, None] - shift[None, :]
    return vals[_layer_index(depth, H, spec.layers)]


def _fault(spec: FieldSpec, rng) -> np.ndarray:
    base = _layered(spec, rng)
    H, W = base.shape
    x0 = rng.uniform(0.3, 0.7) * W
    dip = rng.uniform(-0.5, 0.5)  # lateral drift per row
    i, j = np.mgrid[0:H, 0:W]
    hanging = j >= x0 + dip * (i - H / 2)
    src = np.clip(i - spec.throw, 0, H - 1)
    return np.where(hanging, base[src, j], base)


def _broadband(spec: FieldSpec, rng) -> np.ndarray:
    H, W = spec.height, spec.width
    noise = rng.standard_normal((H, W))
    freq = physical_radius(H, W)
    amp = np.zeros_like(freq)
    nz = freq > 0
    amp[nz] = freq[nz] ** (spec.slope / 2.0)
    return idft_centered(dft_centered(noise) * amp)


_GENERATORS = {"layered": _layered, "curved": _curved, "fault": _fault, "broadband": _broadband}


def gen_field(spec: FieldSpec) -> np.ndarray:
    """Field for ``spec``, min-max normalized to [0, 1]; pure in ``spec``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    return minmax(_GENERATORS[spec.kind](spec, rng))


def physical_radius(H: int, W: int) -> np.ndarray:
    """Radial frequency in cycles per pixel on the centered grid."""
    fy = (np.arange(H) - H // 2) / H
    fx = (np.arange(W) - W // 2) / W
    return np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)


def radial_spectrum_slope(u, n_bins: int = 20) -> float:
    """Least-squares slope of log radially-averaged power against log frequency,
    over the disc inside the axis Nyquist limit."""
    u = np.asarray(u, dtype=np.float64)
    H, W = u.shape
    p = np.abs(dft_centered(u - u.mean())) ** 2
    f = physical_radius(H, W)
    fmin = 1.0 / max(H, W)
    edges = np.geomspace(fmin, 0.5, n_bins + 1)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (f >= lo) & (f < hi)
        if sel.any():
            xs.append(np.log(f[sel].mean()))
            ys.append(np.log(p[sel].mean()))
    return float(np.polyfit(xs, ys, 1)[0])


def toy_observe(y, mode: str = "identity", n_shots: int = N_SHOTS, cutoff: float = 0.2) -> np.ndarray:
    """Tile a (possibly transformed) field into an ``N_s x H x W`` observation.

    ``identity`` copies y; ``bandlimit`` keeps bins with normalized radius
    below ``cutoff``; ``smear`` integrates down the rows (running mean).
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise InvalidInput("toy_observe takes a single 2D field")
    if mode == "identity":
        shot = y
    elif mode == "bandlimit":
        keep = radial_coordinates(*y.shape) < cutoff
        shot = idft_centered(dft_centered(y) * keep)
    elif mode == "smear":
        shot = np.cumsum(y, axis=0) / np.arange(1, y.shape[0] + 1)[:, None]
    else:
        raise InvalidInput(f"unknown observation mode {mode!r}")
    return np.repeat(shot[None], n_shots, axis=0)


def make_dataset(n: int, size: int | tuple[int, int], kinds=("layered", "curved", "fault"),
                 mode: str = "identity", seed: int = 0, **spec_kw):
    """``n`` (observation, field) pairs; sample i uses kind ``kinds[i % len]`` and seed ``seed*100003 + i``."""
    H, W = (size, size) if isinstance(size, int) else size
    xs, ys = [], []
    base = FieldSpec(height=H, width=W, **spec_kw)
    for i in range(n):
        spec = replace(base, kind=kinds[i % len(kinds)], seed=seed * 100003 + i)
        y = gen_field(spec)
        xs.append(toy_observe(y, mode))
        ys.append(y)
    return np.stack(xs), np.stack(ys)
