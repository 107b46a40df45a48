"""Toy training loop with checkpoints and a per-epoch CSV log.

The learning rate is set once per epoch from the schedule.  Samples are
shuffled with a numpy generator seeded from the run seed, so two runs with
the same config and thread count produce bit-identical loss curves.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import make_dataset
from .errors import InvalidConfig, InvalidInput
from .evaluation import eval_metrics
from .losses import LossWeights, composite_loss
from .model import ModelConfig, SpamoeModel, backward, build_model, forward_with_tape
from .optim import AdamState, ScheduleConfig, lr_at, optimizer_step
from .tensor import read_tensor_record, write_tensor_record

log = logging.getLogger(__name__)

LOSS_TERMS = ("mae", "grad", "freq", "balance", "router_l1", "router_l2")


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    weight_decay: float = 1e-4
    batch_size: int = 16
    epochs: int = 50
    max_steps: int | None = None
    n_samples: int = 64
    kinds: tuple[str, ...] = ("layered", "curved", "fault")
    observe: str = "identity"
    seed: int = 0
    eval_every: int = 1  # epochs between full-set evaluations; the last epoch is always evaluated

    def validate(self) -> None:
        if self.batch_size < 1 or self.epochs < 0 or self.n_samples < 1:
            raise InvalidConfig("batch_size and n_samples must be >= 1, epochs >= 0")
        if self.eval_every < 1:
            raise InvalidConfig("eval_every must be >= 1")
        if self.max_steps is not None and self.max_steps < 0:
            raise InvalidConfig("max_steps must be >= 0")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "schedule": asdict(self.schedule),
            "weights": asdict(self.weights),
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "max_steps": self.max_steps,
            "n_samples": self.n_samples,
            "kinds": list(self.kinds),
            "observe": self.observe,
            "seed": self.seed,
            "eval_every": self.eval_every,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["model"] = ModelConfig.from_dict(d["model"])
        d["schedule"] = ScheduleConfig(**d["schedule"])
        d["weights"] = LossWeights(**d["weights"])
        d["kinds"] = tuple(d["kinds"])
        return cls(**d)


@dataclass
class TrainReport:
    initial: dict
    final: dict
    loss_curve: list[float] = field(default_factory=list)
    epochs: list[dict] = field(default_factory=list)
    usage: list[int] = field(default_factory=list)
    steps: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def toy_dataset(cfg: TrainConfig):
    m = cfg.model
    xs, ys = make_dataset(cfg.n_samples, (m.height, m.width), cfg.kinds, cfg.observe, cfg.seed)
    if xs.shape[1:] != (m.n_shots, m.time_samples, m.receivers):
        raise InvalidConfig(
            f"toy observations have shape {xs.shape[1:]}, model expects "
            f"{(m.n_shots, m.time_samples, m.receivers)}; set time_samples=height and n_shots=5")
    return torch.from_numpy(xs), torch.from_numpy(ys)


def predict(model: SpamoeModel, xs: torch.Tensor, batch_size: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Predictions for every sample plus the per-expert selection counts."""
    outs, usage = [], np.zeros(len(model.experts), dtype=np.int64)
    with torch.no_grad():
        for s in range(0, xs.shape[0], batch_size):
            y_hat, stats = model(xs[s:s + batch_size])
            outs.append(y_hat.numpy())
            usage += stats.usage()
    return np.concatenate(outs), usage


def evaluate(model: SpamoeModel, xs, ys) -> tuple[dict, np.ndarray]:
    pred, usage = predict(model, xs)
    return eval_metrics(pred, ys.numpy()).to_dict(), usage


def train_toy(cfg: TrainConfig, out_dir=None, dataset=None) -> TrainReport:
    """Train on a synthetic set; ``out_dir`` (optional) receives ``log.csv``,
    ``report.json`` and a checkpoint."""
    cfg.validate()
    xs, ys = dataset if dataset is not None else toy_dataset(cfg)
    if xs.shape[0] != ys.shape[0] or xs.shape[0] == 0:
        raise InvalidInput("dataset is empty or misaligned")
    model = build_model(cfg.model, cfg.seed)
    params = dict(model.named_parameters())
    state = AdamState()
    rng = np.random.default_rng(cfg.seed)
    initial, usage = evaluate(model, xs, ys)
    report = TrainReport(initial=initial, final=initial, usage=usage.tolist())
    rows = []
    n = xs.shape[0]
    for epoch in range(cfg.epochs):
        if cfg.max_steps is not None and report.steps >= cfg.max_steps:
            break
        lr = lr_at(epoch, cfg.schedule)
        order = rng.permutation(n)
        sums = dict.fromkeys(LOSS_TERMS, 0.0)
        sums["total"] = 0.0
        batches = 0
        for s in range(0, n, cfg.batch_size):
            if cfg.max_steps is not None and report.steps >= cfg.max_steps:
                break
            idx = torch.from_numpy(order[s:s + cfg.batch_size])
            y_hat, tape = forward_with_tape(model, xs[idx])
            loss = composite_loss(y_hat, ys[idx], tape.router_stats, cfg.weights)
            grads = backward(tape, loss.total)
            optimizer_step(params, grads, state, lr, cfg.weight_decay)
            total = float(loss.total.detach())
            report.loss_curve.append(total)
            report.steps += 1
            batches += 1
            sums["total"] += total
            for k in LOSS_TERMS:
                sums[k] += loss.terms[k]
        done = epoch == cfg.epochs - 1 or (cfg.max_steps is not None and report.steps >= cfg.max_steps)
        if not (done or (epoch + 1) % cfg.eval_every == 0):
            continue
        metrics, usage = evaluate(model, xs, ys)
        row = {"epoch": epoch, "lr": lr, **{f"loss_{k}": v / max(batches, 1) for k, v in sums.items()},
               **metrics}
        row.update({f"usage_{e}": int(c) for e, c in enumerate(usage)})
        rows.append(row)
        report.final, report.usage = metrics, usage.tolist()
        log.info("epoch %d lr %.3g loss %.5f mae %.5f", epoch, lr, row["loss_total"], metrics["mae"])
    report.epochs = rows
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_log(out / "log.csv", rows, len(model.experts))
        save_checkpoint(out, model, cfg, state, epoch=len(rows))
        (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    return report


def log_header(n_experts: int) -> list[str]:
    return ["epoch", "lr", "loss_total", *(f"loss_{k}" for k in LOSS_TERMS), "mae", "rmse", "ssim",
            *(f"usage_{e}" for e in range(n_experts))]


def write_log(path, rows, n_experts: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=log_header(n_experts))
        w.writeheader()
        w.writerows(rows)


def save_checkpoint(out_dir, model: SpamoeModel, cfg: TrainConfig | None = None,
                    state: AdamState | None = None, epoch: int = 0) -> None:
    """``manifest.json`` plus ``params.bin``: one tensor record per parameter in manifest order."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    named = list(model.named_parameters())
    manifest = {
        "format": "spamoe-checkpoint-1",
        "model": model.cfg.to_dict(),
        "train": cfg.to_dict() if cfg is not None else None,
        "epoch": epoch,
        "adam_step": state.step if state is not None else 0,
        "params": [{"name": n, "shape": list(p.shape)} for n, p in named],
    }
    with open(out / "params.bin", "wb") as fh:
        for _, p in named:
            write_tensor_record(fh, p.detach().numpy())
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_checkpoint(ckpt_dir) -> tuple[SpamoeModel, dict]:
    path = Path(ckpt_dir)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError as exc:
        raise InvalidInput(f"no checkpoint manifest in {path}") from exc
    model = SpamoeModel(ModelConfig.from_dict(manifest["model"]))
    params = dict(model.named_parameters())
    with open(path / "params.bin", "rb") as fh, torch.no_grad():
        for entry in manifest["params"]:
            arr = read_tensor_record(fh)
            p = params.get(entry["name"])
            if p is None or tuple(p.shape) != arr.shape:
                raise InvalidInput(f"checkpoint parameter {entry['name']} does not fit the model")
            p.copy_(torch.from_numpy(arr))
    return model, manifest
