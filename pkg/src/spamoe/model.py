"""The composed SPAMoE pipeline and its differentiation tape."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .bands import decompose, make_masks
from .encoder import ProxyEncoder, reshape_shots
from .errors import InvalidConfig, InvalidInput, InvalidState
from .experts import EXPERT_KINDS, build_expert
from .preference import FrequencyPreference
from .router import RouterParams, gate, spatial_logits, spectral_logits


@dataclass
class ModelConfig:
    height: int = 70
    width: int = 70
    time_samples: int = 70
    n_shots: int = 5
    channels: int = 8
    n_bands: int = 3
    band_gamma: float = 20.0
    mask_kind: str = "soft"
    eta: float = 10.0
    top_k: int = 2
    experts: tuple[str, ...] = EXPERT_KINDS
    expert_layers: int = 2
    fno_layers: int | None = None  # per-kind overrides of expert_layers
    mno_layers: int | None = None
    lno_layers: int | None = None
    fno_modes: tuple[int, int] = (16, 16)
    mno_scales: tuple[float, ...] = (1.0, 0.6, 0.3)
    mno_kernel: int = 3
    lno_radius: int = 1
    d_k: int = 16
    router_hidden: int = 32
    router: str = "spectral"
    encoder_dim: int = 16
    encoder_layers: int = 2
    patch: int | None = None
    linear: bool = False

    @property
    def grid(self) -> tuple[int, int]:
        return (self.height, self.width)

    def layers_for(self, kind: str) -> int:
        n = getattr(self, f"{kind}_layers", None)
        return self.expert_layers if n is None else n

    @property
    def receivers(self) -> int:
        return self.width

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experts"] = list(self.experts)
        d["fno_modes"] = list(self.fno_modes)
        d["mno_scales"] = list(self.mno_scales)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        for key in ("experts", "fno_modes", "mno_scales"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class RouterStats:
    logits: torch.Tensor  # [B, N_E]
    gates: torch.Tensor  # [B, N_E], zero for unselected experts
    selected: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def importance(self) -> torch.Tensor:
        return self.gates.sum(dim=0)

    def usage(self) -> np.ndarray:
        counts = np.zeros(self.logits.shape[-1], dtype=np.int64)
        for sel in self.selected:
            counts[list(sel)] += 1
        return counts


class SpamoeModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.router not in ("spectral", "spatial"):
            raise InvalidConfig(f"unknown router {cfg.router!r}")
        if not 1 <= cfg.top_k <= len(cfg.experts):
            raise InvalidConfig(f"top_k={cfg.top_k} with {len(cfg.experts)} experts")
        self.cfg = cfg
        H, W = cfg.grid
        self.encoder = ProxyEncoder((cfg.time_samples, cfg.n_shots * cfg.receivers), cfg.grid,
                                    cfg.channels, patch=cfg.patch, out_patch=cfg.patch,
                                    dim=cfg.encoder_dim, layers=cfg.encoder_layers)
        masks = make_masks(H, W, cfg.n_bands, cfg.band_gamma, cfg.mask_kind)
        self.register_buffer("masks", masks.as_tensor(), persistent=False)
        self.register_buffer("centers", torch.from_numpy(np.array(masks.centers)), persistent=False)
        self.preference = FrequencyPreference(len(cfg.experts), cfg.eta)
        in_ch = 1 if cfg.router == "spectral" else cfg.channels
        self.router = RouterParams(len(cfg.experts), in_ch, cfg.d_k, cfg.router_hidden)
        self.experts = nn.ModuleList(
            build_expert(kind, cfg.channels, cfg.grid, layers=cfg.layers_for(kind), linear=cfg.linear,
                         fno_modes=cfg.fno_modes, mno_scales=cfg.mno_scales,
                         mno_kernel=cfg.mno_kernel, lno_radius=cfg.lno_radius)
            for kind in cfg.experts
        )
        self.readout = nn.Conv2d(cfg.channels, 1, kernel_size=1, dtype=torch.float64)

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(reshape_shots(x))

    def expert_inputs(self, z: torch.Tensor) -> torch.Tensor:
        """Band-mixed inputs ``[B, N_E, C, H, W]`` for every expert."""
        bands = decompose(z, self.masks)  # [B, K, C, H, W]
        pi = self.preference.affinity(self.centers)  # [N_E, K]
        return torch.einsum("ek,bkchw->bechw", pi, bands)

    def logits(self, z: torch.Tensor) -> torch.Tensor:
        if self.cfg.router == "spectral":
            return spectral_logits(z, self.router)
        return spatial_logits(z, self.router)

    def forward(self, x) -> tuple[torch.Tensor, RouterStats]:
        """Observation ``[B, N_s, T, N_r]`` -> prediction ``[B, H, W]`` plus routing stats."""
        x = torch.as_tensor(x, dtype=torch.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        if x.ndim != 4:
            raise InvalidInput(f"observation must be [B, N_s, T, N_r], got {tuple(x.shape)}")
        z = self.encode(x)
        zt = self.expert_inputs(z)
        g = self.logits(z)
        B = z.shape[0]
        decisions = [gate(g[b], self.cfg.top_k) for b in range(B)]
        gates = torch.stack([d.dense() for d in decisions])
        fused = torch.zeros_like(z)
        for e, expert in enumerate(self.experts):
            idx = [b for b in range(B) if e in decisions[b].selected]
            if not idx:
                continue
            ii = torch.tensor(idx)
            out = expert(zt[ii, e])
            fused = fused.index_add(0, ii, gates[ii, e].reshape(-1, 1, 1, 1) * out)
        y_hat = self.readout(fused)[:, 0]
        stats = RouterStats(g, gates, [d.selected for d in decisions])
        return (y_hat[0] if single else y_hat), stats


def build_model(cfg: ModelConfig, seed: int = 0) -> SpamoeModel:
    torch.manual_seed(seed)
    return SpamoeModel(cfg)


class Tape:
    """Record of one differentiable forward pass; consumed by :func:`backward`."""

    def __init__(self, model: SpamoeModel, y_hat: torch.Tensor, stats: RouterStats):
        self.model = model
        self.y_hat = y_hat
        self.router_stats = stats
        self.consumed = False


def forward_with_tape(model: SpamoeModel, x) -> tuple[torch.Tensor, Tape]:
    with torch.enable_grad():
        y_hat, stats = model(x)
    return y_hat, Tape(model, y_hat, stats)


def backward(tape: Tape, loss: torch.Tensor) -> dict[str, torch.Tensor]:
    """Reverse-mode gradients of ``loss`` for every named model parameter.

    Top-k selection is a constant of the pass; gradient reaches the router
    through the gate weights of the selected experts only.
    """
    if tape.consumed:
        raise InvalidState("tape already consumed")
    tape.consumed = True
    names, params = zip(*tape.model.named_parameters())
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    return {n: (torch.zeros_like(p) if g is None else g) for n, p, g in zip(names, params, grads)}
