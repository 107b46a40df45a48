"""Flat ``key = value`` run configuration.

One key per line, ``#`` starts a comment.  Unknown keys are rejected.
Optimization and loss defaults are the published table values; model sizes
default to the desk-scale choices of :class:`~spamoe.model.ModelConfig`.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import InvalidConfig
from .losses import LossWeights
from .metrics import DEFAULT_EPS, DEFAULT_R_SPLIT
from .model import ModelConfig
from .optim import ScheduleConfig
from .train import TrainConfig


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace("x", ",").split(",") if v.strip())


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _words(s: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in s.split(",") if v.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s: str) -> int | None:
    return None if s.strip().lower() in ("", "none", "auto") else int(s)


@dataclass
class RunConfig:
    # optimization
    lr: float = 1e-4
    weight_decay: float = 1e-4
    batch: int = 32
    epochs: int = 160
    max_steps: int | None = None
    warmup: int = 5
    T_0: int = 10
    T_mult: int = 2
    scheduler_gamma: float = 0.3
    # loss weights
    lambda_grad: float = 0.15
    lambda_freq: float = 0.10
    lambda_ce: float = 0.20
    lambda_l1: float = 0.60
    lambda_l2: float = 0.40
    # model
    height: int = 70
    width: int = 70
    time_samples: int = 70
    n_shots: int = 5
    channels: int = 8
    K: int = 3
    gamma_band: float = 20.0
    mask_kind: str = "soft"
    eta: float = 10.0
    top_k: int = 2
    experts: tuple[str, ...] = ("fno", "mno", "lno")
    expert_layers: int = 2
    fno_layers: int | None = None
    mno_layers: int | None = None
    lno_layers: int | None = None
    fno_modes: tuple[int, ...] = (16, 16)
    mno_scales: tuple[float, ...] = (1.0, 0.6, 0.3)
    mno_kernel: int = 3
    lno_radius: int = 1
    d_k: int = 16
    router_hidden: int = 32
    router: str = "spectral"
    encoder_dim: int = 16
    encoder_layers: int = 2
    patch: int | None = None
    # data and analysis
    n_samples: int = 64
    kinds: tuple[str, ...] = ("layered", "curved", "fault")
    observe: str = "identity"
    r_split: float = DEFAULT_R_SPLIT
    eps: float = DEFAULT_EPS
    eval_every: int = 1
    seed: int = 0

    def train_config(self) -> TrainConfig:
        model = ModelConfig(
            height=self.height, width=self.width, time_samples=self.time_samples, n_shots=self.n_shots,
            channels=self.channels, n_bands=self.K, band_gamma=self.gamma_band, mask_kind=self.mask_kind,
            eta=self.eta, top_k=self.top_k, experts=self.experts, expert_layers=self.expert_layers,
            fno_layers=self.fno_layers, mno_layers=self.mno_layers, lno_layers=self.lno_layers,
            fno_modes=tuple(self.fno_modes), mno_scales=self.mno_scales, mno_kernel=self.mno_kernel,
            lno_radius=self.lno_radius, d_k=self.d_k, router_hidden=self.router_hidden,
            router=self.router, encoder_dim=self.encoder_dim, encoder_layers=self.encoder_layers,
            patch=self.patch,
        )
        schedule = ScheduleConfig(self.lr, self.warmup, self.T_0, self.T_mult, self.scheduler_gamma)
        weights = LossWeights(self.lambda_grad, self.lambda_freq, self.lambda_ce, self.lambda_l1, self.lambda_l2)
        return TrainConfig(model=model, schedule=schedule, weights=weights, weight_decay=self.weight_decay,
                           batch_size=self.batch, epochs=self.epochs, max_steps=self.max_steps,
                           n_samples=self.n_samples, kinds=self.kinds, observe=self.observe,
                           seed=self.seed, eval_every=self.eval_every)


_PARSERS = {
    "experts": _words, "kinds": _words, "fno_modes": _ints, "mno_scales": _floats,
    "max_steps": _opt_int, "patch": _opt_int, "fno_layers": _opt_int, "mno_layers": _opt_int,
    "lno_layers": _opt_int,
}
_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    if key in _PARSERS:
        return _PARSERS[key](raw)
    default = getattr(RunConfig, key)
    if isinstance(default, bool):
        return _bool(raw)
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


def apply_overrides(cfg: RunConfig, pairs: dict[str, str]) -> RunConfig:
    for key, raw in pairs.items():
        key = key.strip().replace("-", "_")
        if key not in _FIELDS:
            raise InvalidConfig(f"unknown config key {key!r}")
        try:
            setattr(cfg, key, _parse_value(key, raw))
        except ValueError as exc:
            raise InvalidConfig(f"bad value for {key}: {raw!r} ({exc})") from exc
    return cfg


def parse_config(text: str) -> RunConfig:
    pairs = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {n}: expected key = value")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in pairs:
            raise InvalidConfig(f"line {n}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return apply_overrides(RunConfig(), pairs)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return ",".join(str(x) for x in v)
        return "none" if v is None else str(v)

    return "".join(f"{f.name} = {fmt(getattr(cfg, f.name))}\n" for f in fields(RunConfig))
