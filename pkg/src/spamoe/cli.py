"""``spamoe`` command-line entry point.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 theorem violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import torch

from .bands import make_masks
from .config import RunConfig, apply_overrides, dump_config, load_config
from .data import FieldSpec, gen_field, toy_observe
from .encoder import measure_interp_response
from .errors import InvalidInput, SpamoeError
from .evaluation import eval_metrics
from .experts import build_expert
from .metrics import band_energies, radial_grid
from .router import RouterParams, gate, spatial_logits, spectral_logits
from .tensor import dft_centered, idft_centered, load_tensor, save_pgm, save_tensor
from .theory import theorem1_suite, theorem2_suite
from .train import load_checkpoint, train_toy

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2, 3

log = logging.getLogger("spamoe")


class UsageError(Exception):
    pass


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 70x70, got {text!r}") from None
    if h < 2 or w < 2:
        raise argparse.ArgumentTypeError("both sides must be >= 2")
    return h, w


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _load_latent(path) -> np.ndarray:
    z = load_tensor(path)
    if z.ndim == 2:
        z = z[None]
    if z.ndim != 3:
        raise InvalidInput(f"latent must be C x H x W (or H x W), got shape {z.shape}")
    return z


def cmd_analyze(a) -> int:
    u = load_tensor(a.field)
    e = band_energies(u, radial_grid(*u.shape[-2:], a.r_split), a.eps)
    _emit({"e_low": e.e_low, "e_high": e.e_high, "hl": e.hl}, a.json_out)
    return EXIT_OK


def cmd_decompose(a) -> int:
    z = _load_latent(a.latent)
    H, W = z.shape[-2:]
    masks = make_masks(H, W, a.K, a.gamma, a.kind)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spectrum = dft_centered(z)
    files = []
    for k, m in enumerate(masks.masks):
        band = spectrum * m
        save_tensor(out / f"band_{k}.bin", idft_centered(band))
        save_pgm(out / f"band_{k}_spectrum.pgm", np.abs(band).mean(axis=0), log_scale=True)
        files += [f"band_{k}.bin", f"band_{k}_spectrum.pgm"]
    _emit({"K": masks.K, "kind": masks.kind, "gamma": masks.gamma, "centers": list(masks.centers),
           "files": files})
    return EXIT_OK


def cmd_route(a) -> int:
    z = torch.from_numpy(_load_latent(a.latent))
    trained = False
    if a.model:
        model, _ = load_checkpoint(a.model)
        k = model.cfg.top_k
        if model.cfg.router == a.baseline:
            router, trained = model.router, True
        else:
            torch.manual_seed(a.seed)
            router = RouterParams(len(model.experts), z.shape[0] if a.baseline == "spatial" else 1)
    else:
        torch.manual_seed(a.seed)
        k = a.top_k
        router = RouterParams(a.experts, z.shape[0] if a.baseline == "spatial" else 1)
    with torch.no_grad():
        g = (spectral_logits if a.baseline == "spectral" else spatial_logits)(z, router)
        d = gate(g, k)
    _emit({"g": g.tolist(), "selected": list(d.selected), "alpha": d.alpha.tolist(),
           "router": a.baseline, "trained": trained})
    return EXIT_OK


def cmd_verify(a) -> int:
    suite = theorem1_suite if a.theorem == 1 else theorem2_suite
    report = suite(a.cases, a.seed, a.size, a.r_split, a.eps)
    _emit(report.to_dict(), a.json_out)
    return EXIT_VIOLATION if report.violations else EXIT_OK


def cmd_gen(a) -> int:
    h, w = a.size
    spec = FieldSpec(a.kind, h, w, a.layers, a.throw, a.curvature, a.slope, a.seed)
    y = gen_field(spec)
    save_tensor(a.out, y)
    if a.observe_out:
        save_tensor(a.observe_out, toy_observe(y, a.observe))
    _emit({"kind": a.kind, "shape": [h, w], "seed": a.seed, "out": a.out})
    return EXIT_OK


def cmd_train(a) -> int:
    cfg = load_config(a.config) if a.config else RunConfig()
    apply_overrides(cfg, dict(kv.split("=", 1) for kv in a.set))
    for key in ("epochs", "seed", "lr", "max_steps"):
        v = getattr(a, key)
        if v is not None:
            setattr(cfg, key, v)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run.cfg").write_text(dump_config(cfg))
    report = train_toy(cfg.train_config(), out)
    _emit({"steps": report.steps, "initial": report.initial, "final": report.final, "usage": report.usage,
           "out": str(out)})
    return EXIT_OK


def cmd_eval(a) -> int:
    pred, true = load_tensor(a.pred), load_tensor(a.true)
    _emit(eval_metrics(pred, true).to_dict(), a.json_out)
    return EXIT_OK


def cmd_measure_interp(a) -> int:
    H, W = a.size
    resp = measure_interp_response(H, W, *a.mid, radial_grid(H, W, a.r_split))
    if a.pgm:
        save_pgm(a.pgm, resp.response)
    _emit({"alpha_hat": resp.alpha_hat, "beta_hat": resp.beta_hat, "bound": resp.bound}, a.json_out)
    return EXIT_OK


def cmd_expert_bench(a) -> int:
    torch.manual_seed(a.seed)
    x = torch.randn(a.batch, a.channels, *a.size, dtype=torch.float64)
    results = {}
    for kind in a.experts.split(","):
        expert = build_expert(kind, a.channels, a.size, layers=a.layers)
        with torch.no_grad():
            expert(x)  # warm-up
            t0 = time.perf_counter()
            for _ in range(a.repeats):
                expert(x)
            dt = time.perf_counter() - t0
        results[kind] = {"fields_per_sec": a.batch * a.repeats / dt, "seconds": dt}
    _emit({"size": list(a.size), "channels": a.channels, "batch": a.batch, "repeats": a.repeats,
           "threads": torch.get_num_threads(), "experts": results})
    return EXIT_OK


def cmd_inspect_prefs(a) -> int:
    model, _ = load_checkpoint(a.model)
    with torch.no_grad():
        f = model.preference.f
        pi = model.preference.affinity(model.centers)
    _emit({"experts": list(model.cfg.experts), "f": f.tolist(), "pi": pi.tolist(),
           "eta": float(model.preference.eta), "centers": model.centers.tolist()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spamoe", description="Spectral-preserving operator MoE toolkit")
    p.add_argument("--threads", type=int, default=None,
                   help="intra-op threads (default: $SPAMOE_THREADS or all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("analyze", cmd_analyze, "band energies and HL ratio of a field")
    sp.add_argument("field")
    sp.add_argument("--r-split", type=float, default=0.25)
    sp.add_argument("--eps", type=float, default=1e-12)
    sp.add_argument("--json-out")

    sp = add("decompose", cmd_decompose, "split a latent into frequency bands")
    sp.add_argument("latent")
    sp.add_argument("-K", type=int, default=3)
    sp.add_argument("--gamma", type=float, default=20.0)
    sp.add_argument("--kind", choices=("soft", "hard"), default="soft")
    sp.add_argument("--out-dir", required=True)

    sp = add("route", cmd_route, "router logits and gate for a latent")
    sp.add_argument("latent")
    sp.add_argument("--model", help="checkpoint directory (default: fresh router from --seed)")
    sp.add_argument("--baseline", choices=("spectral", "spatial"), default="spectral")
    sp.add_argument("--experts", type=int, default=3)
    sp.add_argument("--top-k", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("verify", cmd_verify, "run a theorem check suite")
    sp.add_argument("--theorem", type=int, choices=(1, 2), required=True)
    sp.add_argument("--cases", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=_size, default=(16, 16))
    sp.add_argument("--r-split", type=float, default=0.25)
    sp.add_argument("--eps", type=float, default=1e-12)
    sp.add_argument("--json-out")

    sp = add("gen", cmd_gen, "generate a synthetic field")
    sp.add_argument("--kind", choices=("layered", "curved", "fault", "broadband"), default="layered")
    sp.add_argument("--size", type=_size, default=(70, 70))
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--layers", type=int, default=4)
    sp.add_argument("--throw", type=int, default=4)
    sp.add_argument("--curvature", type=float, default=3.0)
    sp.add_argument("--slope", type=float, default=-2.0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--observe", choices=("identity", "bandlimit", "smear"), default="identity")
    sp.add_argument("--observe-out", help="also write the toy observation here")

    sp = add("train", cmd_train, "train on synthetic data")
    sp.add_argument("--config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--seed", type=int)

    sp = add("eval", cmd_eval, "MAE, RMSE and SSIM of a prediction")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--true", required=True)
    sp.add_argument("--json-out")

    sp = add("measure-interp", cmd_measure_interp, "diagonal response of a bilinear resize cycle")
    sp.add_argument("--size", type=_size, default=(70, 70))
    sp.add_argument("--mid", type=_size, default=(35, 35))
    sp.add_argument("--r-split", type=float, default=0.25)
    sp.add_argument("--pgm")
    sp.add_argument("--json-out")

    sp = add("expert-bench", cmd_expert_bench, "expert forward throughput")
    sp.add_argument("--size", type=_size, default=(70, 70))
    sp.add_argument("--channels", type=int, default=8)
    sp.add_argument("--batch", type=int, default=4)
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--repeats", type=int, default=5)
    sp.add_argument("--experts", default="fno,mno,lno")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("inspect-prefs", cmd_inspect_prefs, "frequency preferences and band affinities of a model")
    sp.add_argument("model")
    return p


def _set_threads(flag: int | None) -> None:
    n = flag
    if n is None and os.environ.get("SPAMOE_THREADS"):
        try:
            n = int(os.environ["SPAMOE_THREADS"])
        except ValueError:
            raise UsageError(f"SPAMOE_THREADS must be an integer, got {os.environ['SPAMOE_THREADS']!r}") from None
    if n is not None:
        if n < 1:
            raise UsageError("thread count must be >= 1")
        torch.set_num_threads(n)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _set_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spamoe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpamoeError, OSError) as exc:
        print(f"spamoe: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
