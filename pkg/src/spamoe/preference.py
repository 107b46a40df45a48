"""Learnable per-expert frequency preferences and band mixing."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .errors import InvalidInput

DEFAULT_ETA = 10.0
# keeps the logistic inverse finite for preferences placed on the 0/1 centers
_INIT_CLIP = 0.02


def _logit(p):
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


class FrequencyPreference(nn.Module):
    """Preferences ``f_e = sigmoid(raw_e)``, so every f_e stays in [0, 1]."""

    def __init__(self, n_experts: int, eta: float = DEFAULT_ETA, init=None):
        super().__init__()
        if eta <= 0:
            raise InvalidInput("eta must be positive")
        self.eta = float(eta)
        if init is None:
            init = np.linspace(0.0, 1.0, n_experts) if n_experts > 1 else np.array([0.5])
            init = np.clip(init, _INIT_CLIP, 1.0 - _INIT_CLIP)
        init = np.asarray(init, dtype=np.float64)
        if init.shape != (n_experts,):
            raise InvalidInput(f"need {n_experts} initial preferences, got shape {init.shape}")
        self.raw = nn.Parameter(torch.from_numpy(_logit(init)))

    @classmethod
    def from_values(cls, f, eta: float = DEFAULT_ETA) -> "FrequencyPreference":
        """Exact placement; f = 0 or 1 gives an infinite raw value."""
        f = np.atleast_1d(np.asarray(f, dtype=np.float64))
        return cls(len(f), eta, init=f)

    @property
    def f(self) -> torch.Tensor:
        return torch.sigmoid(self.raw)

    def affinity(self, centers) -> torch.Tensor:
        return band_affinity(self.f, centers, self.eta)


def band_affinity(f, centers, eta: float = DEFAULT_ETA) -> torch.Tensor:
    """Softmax over bands of ``-eta (f_e - c_k)^2``; rows are distributions."""
    f = torch.as_tensor(f, dtype=torch.float64).reshape(-1, 1)
    c = torch.as_tensor(np.asarray(centers, dtype=np.float64)).reshape(1, -1)
    if c.shape[1] < 2:
        raise InvalidInput("need at least two band centers")
    return torch.softmax(-eta * (f - c) ** 2, dim=1)


def mix_bands(bands, pi_e) -> torch.Tensor:
    """Convex combination ``sum_k pi_e[k] * bands[k]`` over the leading band axis."""
    bands = torch.stack(list(bands)) if isinstance(bands, (list, tuple)) else torch.as_tensor(bands)
    pi_e = torch.as_tensor(pi_e, dtype=bands.dtype)
    if pi_e.ndim != 1 or pi_e.shape[0] != bands.shape[0]:
        raise InvalidInput(f"{bands.shape[0]} bands but weight vector of shape {tuple(pi_e.shape)}")
    return torch.tensordot(pi_e, bands, dims=1)


def affinity_gradient(raw, centers, upstream, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Gradient of ``sum(upstream * pi)`` with respect to the raw preferences.

    Hand-derived chain: softmax Jacobian, then ``ds_k/df = -2 eta (f - c_k)``,
    then the logistic ``df/draw = f (1 - f)``.
    """
    raw = np.asarray(raw, dtype=np.float64).reshape(-1)
    c = np.asarray(centers, dtype=np.float64).reshape(1, -1)
    u = np.asarray(upstream, dtype=np.float64)
    if u.shape != (raw.size, c.shape[1]):
        raise InvalidInput(f"upstream must be {(raw.size, c.shape[1])}, got {u.shape}")
    f = 1.0 / (1.0 + np.exp(-raw))
    s = -eta * (f[:, None] - c) ** 2
    s -= s.max(axis=1, keepdims=True)
    pi = np.exp(s)
    pi /= pi.sum(axis=1, keepdims=True)
    ds = pi * (u - (pi * u).sum(axis=1, keepdims=True))
    df = (ds * (-2.0 * eta) * (f[:, None] - c)).sum(axis=1)
    return df * f * (1.0 - f)
