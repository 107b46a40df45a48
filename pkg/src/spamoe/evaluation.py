"""MAE, RMSE and windowed SSIM for normalized velocity maps."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import InvalidInput

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


@dataclass(frozen=True)
class EvalMetrics:
    mae: float
    rmse: float
    ssim: float

    def to_dict(self) -> dict:
        return asdict(self)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _window_for(shape) -> np.ndarray:
    # shrink to the largest odd size that fits fields smaller than 11 px
    size = min(SSIM_WINDOW, *shape)
    size -= 1 - size % 2
    return gaussian_window(size)


def ssim(y_hat, y, data_range: float = 1.0) -> float:
    """Mean SSIM over all window positions fully inside the field."""
    a = np.asarray(y_hat, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise InvalidInput(f"SSIM needs two equal 2D fields, got {a.shape} and {b.shape}")
    w = _window_for(a.shape)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    def filt(x):
        return convolve2d(x, w, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    saa = filt(a * a) - mu_a * mu_a
    sbb = filt(b * b) - mu_b * mu_b
    sab = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2)
    return float(np.mean(num / den))


def eval_metrics(y_hat, y) -> EvalMetrics:
    a = np.asarray(y_hat, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    d = a - b
    if a.ndim == 2:
        s = ssim(a, b)
    else:
        s = float(np.mean([ssim(p, t) for p, t in zip(a.reshape(-1, *a.shape[-2:]), b.reshape(-1, *b.shape[-2:]))]))
    return EvalMetrics(float(np.mean(np.abs(d))), float(np.sqrt(np.mean(d * d))), s)
