"""Executable checks of the two HL-ratio bounds and frontend assumption statistics.

Premise checks (does the constructed filter really have the stated gains?)
are kept apart from bound checks, so a :class:`PremiseViolation` always
means a bad construction and a reported violation always means the bound
itself failed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .encoder import ProxyEncoder, down_up
from .errors import InvalidInput, PremiseViolation
from .metrics import DEFAULT_EPS, RadialGrid, assumption_metrics, band_energies, radial_grid
from .tensor import dft_centered, idft_centered

SLACK = 1e-9


def mirror_indices(H: int, W: int):
    """Index arrays mapping each centered bin to its conjugate partner."""
    ci, cj = H // 2, W // 2
    i = (2 * ci - np.arange(H)) % H
    j = (2 * cj - np.arange(W)) % W
    return i[:, None], j[None, :]


@dataclass(frozen=True)
class DiagonalFilter:
    """Real nonnegative gain applied bin-by-bin to the centered spectrum."""

    response: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.response, dtype=np.float64)
        if r.ndim != 2 or np.any(r < 0) or not np.all(np.isfinite(r)):
            raise InvalidInput("filter response must be a finite nonnegative 2D grid")

    @classmethod
    def symmetric(cls, response) -> "DiagonalFilter":
        """Average with the conjugate-mirrored grid so outputs of real fields stay real."""
        r = np.asarray(response, dtype=np.float64)
        mi, mj = mirror_indices(*r.shape)
        return cls(0.5 * (r + r[mi, mj]))

    def __call__(self, u) -> np.ndarray:
        return idft_centered(dft_centered(u) * self.response)

    def band_bounds(self, grid: RadialGrid) -> tuple[float, float]:
        """(max gain over the high band, min gain over the low band)."""
        return float(self.response[grid.high].max()), float(self.response[grid.low].min())


@dataclass
class TheoremReport:
    theorem: int
    cases_run: int = 0
    violations: int = 0
    worst_margin: float = math.inf
    params: dict = field(default_factory=dict)

    def record(self, margin: float) -> None:
        self.cases_run += 1
        self.worst_margin = min(self.worst_margin, margin)
        if margin < -SLACK:
            self.violations += 1

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["worst_margin"]):
            d["worst_margin"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _le(a: float, b: float) -> bool:
    # a <= b up to relative round-off
    return a <= b + SLACK * max(1.0, abs(b))


def verify_theorem1(filters, fields, grid: RadialGrid, eps: float = DEFAULT_EPS,
                    alpha: float | None = None, beta: float | None = None) -> TheoremReport:
    """Check ``HL(I u) <= (alpha/beta)^2 HL(u)`` for every (filter, field) pair.

    ``alpha``/``beta`` default to each filter's own measured band bounds; when
    given they are premises and each filter is checked against them.  The
    intermediate band-energy bounds are asserted too.
    """
    report = TheoremReport(1, params={"r_split": grid.r_split, "eps": eps})
    alphas = []
    for flt in filters:
        a_meas, b_meas = flt.band_bounds(grid)
        a = a_meas if alpha is None else alpha
        b = b_meas if beta is None else beta
        if not (0 < a <= b <= 1 + 1e-15):
            raise PremiseViolation(f"need 0 < alpha <= beta <= 1, got alpha={a}, beta={b}")
        if a_meas > a * (1 + 1e-12) or b_meas < b * (1 - 1e-12):
            raise PremiseViolation(
                f"filter gains (max high {a_meas:.6g}, min low {b_meas:.6g}) break alpha={a}, beta={b}")
        alphas.append((a, b))
        for u in fields:
            src = band_energies(u, grid, eps)
            out = band_energies(flt(u), grid, eps)
            if not _le(out.e_high, a * a * src.e_high):
                raise AssertionError(f"high-band energy bound failed: {out.e_high} > {a * a * src.e_high}")
            if not _le(b * b * src.e_low, out.e_low):
                raise AssertionError(f"low-band energy bound failed: {out.e_low} < {b * b * src.e_low}")
            report.record((a / b) ** 2 * src.hl - out.hl)
    report.params["alpha_beta"] = sorted(set(alphas))[:8]
    return report


def band_gain_filter(grid: RadialGrid, low: tuple[float, float], high: tuple[float, float],
                     rng: np.random.Generator | None = None) -> DiagonalFilter:
    """Filter whose squared gain is drawn in ``low`` on the low band and ``high``
    on the high band (constant at the interval start when ``rng`` is None)."""
    H, W = grid.shape
    if rng is None:
        g2 = np.where(grid.low, low[0], high[0]).astype(np.float64)
    else:
        g2 = np.where(grid.low, rng.uniform(*low, size=(H, W)), rng.uniform(*high, size=(H, W)))
    return DiagonalFilter.symmetric(np.sqrt(g2))


def _check_premises_thm2(y, u_c, y_c, grid, eps, delta, kappa, m, M):
    ey = band_energies(y, grid, eps)
    ec = band_energies(u_c, grid, eps)
    ep = band_energies(y_c, grid, eps)
    tol = 1e-9
    if ec.e_high < delta * ey.e_high * (1 - tol):
        raise PremiseViolation(f"A1 fails: E_H(u_c)={ec.e_high} < delta*E_H(y)={delta * ey.e_high}")
    if ec.e_low > kappa * ey.e_low * (1 + tol):
        raise PremiseViolation(f"A2 fails: E_L(u_c)={ec.e_low} > kappa*E_L(y)={kappa * ey.e_low}")
    for name, out, src in (("high", ep.e_high, ec.e_high), ("low", ep.e_low, ec.e_low)):
        if not (m * src * (1 - tol) <= out <= M * src * (1 + tol)):
            raise PremiseViolation(f"A3 fails on the {name} band: gain {out / src:.6g} outside [{m}, {M}]")
    return ey, ep


def verify_theorem2(delta: float, kappa: float, m: float, M: float, fields, grid: RadialGrid,
                    eps: float = DEFAULT_EPS, seed: int = 0, adversarial: bool = False) -> TheoremReport:
    """Check ``HL(F(u_c)) >= (m/M)(delta/kappa) HL(y)`` on constructed operators.

    For each y, ``u_c`` is y passed through a filter with squared gain
    ``>= delta`` on the high band and ``<= kappa`` on the low band, and F has
    squared gain in ``[m, M]`` everywhere.  ``adversarial`` pins every gain at
    the worst end (high gain delta, low gain kappa, F = m on high, M on low).
    """
    if not (delta >= 1 and kappa >= 1 and 0 < m <= M and M >= 1):
        raise PremiseViolation(f"need delta, kappa >= 1 and 0 < m <= M, M >= 1; got {delta, kappa, m, M}")
    rng = None if adversarial else np.random.default_rng(seed)
    enc = band_gain_filter(grid, (kappa * 0.05, kappa), (delta, 4.0 * delta), rng)
    down = band_gain_filter(grid, (m, M), (m, M), rng)
    if adversarial:
        enc = band_gain_filter(grid, (kappa, kappa), (delta, delta))
        down = band_gain_filter(grid, (M, M), (m, m))
    factor = (m / M) * (delta / kappa)
    report = TheoremReport(2, params={"delta": delta, "kappa": kappa, "m": m, "M": M,
                                      "r_split": grid.r_split, "eps": eps, "adversarial": adversarial})
    for y in fields:
        u_c = enc(y)
        y_c = down(u_c)
        ey, ep = _check_premises_thm2(y, u_c, y_c, grid, eps, delta, kappa, m, M)
        report.record(ep.hl - factor * ey.hl)
    return report


def readout_mean(z) -> np.ndarray:
    """Linear readout of a ``C x H x W`` latent: the channel mean."""
    z = np.asarray(z.detach() if isinstance(z, torch.Tensor) else z, dtype=np.float64)
    return z.mean(axis=-3)


def validate_assumptions(source: str, pairs, grid: RadialGrid, downstream, eps: float = DEFAULT_EPS,
                         encoder: ProxyEncoder | None = None, mid: tuple[int, int] | None = None) -> dict:
    """Table of frontend statistics over ``(x_prime, y)`` pairs.

    ``source='encoder-proxy'`` reads ``u_c`` out of the encoder latent;
    ``source='interp-baseline'`` takes ``u_c`` as the bilinear down-up cycle
    of ``y`` through ``mid``.  ``downstream`` maps a 2D field to a 2D field.
    """
    pairs = list(pairs)
    if not pairs:
        raise InvalidInput("no samples to validate")
    reports = []
    for xp, y in pairs:
        y = np.asarray(y, dtype=np.float64)
        if source == "encoder-proxy":
            if encoder is None:
                raise InvalidInput("encoder-proxy source needs an encoder")
            with torch.no_grad():
                u_c = readout_mean(encoder(torch.as_tensor(xp, dtype=torch.float64)))
        elif source == "interp-baseline":
            H, W = y.shape
            u_c = down_up(y, mid or (max(2, H // 2), max(2, W // 2)))
        elif source == "identity":
            u_c = y
        else:
            raise InvalidInput(f"unknown source {source!r}")
        reports.append(assumption_metrics(u_c, y, downstream(u_c), grid, eps))
    return summarize_reports(reports)


def summarize_reports(reports) -> dict:
    def col(name):
        return np.array([getattr(r, name) for r in reports])

    def order_range(v):
        v = v[v > 0]
        if not v.size:
            return [None, None]
        return [int(math.floor(math.log10(v.min()))), int(math.ceil(math.log10(v.max())))]

    return {
        "n": len(reports),
        "ratio1_mean": float(col("ratio1").mean()),
        "ratio2_mean": float(col("ratio2").mean()),
        "hl_uc_mean": float(col("hl_uc").mean()),
        "hl_y_mean": float(col("hl_y").mean()),
        "hl_yhat_mean": float(col("hl_yhat").mean()),
        "g_high_order_range": order_range(col("g_high")),
        "g_low_order_range": order_range(col("g_low")),
    }


def random_fields(n: int, size: tuple[int, int], rng: np.random.Generator) -> list[np.ndarray]:
    """White-noise and smooth random fields, alternating, so both bands get weight."""
    H, W = size
    out = []
    for i in range(n):
        u = rng.standard_normal((H, W))
        if i % 2:
            u = np.cumsum(np.cumsum(u, axis=0), axis=1)
        out.append(u)
    return out


def theorem1_suite(n_cases: int = 600, seed: int = 0, size=(16, 16), r_split: float = 0.25,
                   eps: float = DEFAULT_EPS, alphas=(0.1, 0.5, 0.9), beta: float = 1.0) -> TheoremReport:
    """Random filters at each ``alpha`` plus the identity boundary filter, each
    run on an equal share of random fields (at least ``n_cases`` pairs total)."""
    rng = np.random.default_rng(seed)
    grid = radial_grid(*size, r_split)
    n_filters = len(alphas) + 1
    per = max(1, -(-n_cases // n_filters))
    merged = TheoremReport(1, params={"r_split": r_split, "eps": eps, "alphas": list(alphas),
                                      "beta": beta, "size": list(size), "seed": seed})
    groups = [(a, [band_gain_filter_amp(grid, (beta, 1.5 * beta), (0.0, a), rng)]) for a in alphas]
    groups.append((1.0, [DiagonalFilter(np.ones(size))]))
    for a, filters in groups:
        b = 1.0 if a == 1.0 else beta
        rep = verify_theorem1(filters, random_fields(per, size, rng), grid, eps, alpha=a, beta=b)
        _merge(merged, rep)
    return merged


def theorem2_suite(n_cases: int = 400, seed: int = 0, size=(16, 16), r_split: float = 0.25,
                   eps: float = DEFAULT_EPS) -> TheoremReport:
    """Random and adversarial constructions over several (delta, kappa, m, M),
    including the all-ones tight case."""
    rng = np.random.default_rng(seed)
    grid = radial_grid(*size, r_split)
    settings = [(1, 1, 1, 1, True), (4, 2, 0.5, 2, False), (4, 2, 0.5, 2, True),
                (2, 3, 0.25, 1, False), (1.5, 1, 1, 4, True), (8, 8, 0.1, 10, False)]
    per = max(1, -(-n_cases // len(settings)))
    merged = TheoremReport(2, params={"r_split": r_split, "eps": eps, "size": list(size), "seed": seed,
                                      "settings": [list(s) for s in settings]})
    for k, (d, kap, m, M, adv) in enumerate(settings):
        rep = verify_theorem2(d, kap, m, M, random_fields(per, size, rng), grid, eps,
                              seed=seed * 7919 + k, adversarial=adv)
        _merge(merged, rep)
    return merged


def band_gain_filter_amp(grid: RadialGrid, low: tuple[float, float], high: tuple[float, float],
                         rng: np.random.Generator) -> DiagonalFilter:
    """Filter with amplitude gain drawn in ``high`` on the high band and ``low`` on the low band."""
    H, W = grid.shape
    g = np.where(grid.low, rng.uniform(*low, size=(H, W)), rng.uniform(*high, size=(H, W)))
    return DiagonalFilter.symmetric(g)


def _merge(into: TheoremReport, rep: TheoremReport) -> None:
    into.cases_run += rep.cases_run
    into.violations += rep.violations
    into.worst_margin = min(into.worst_margin, rep.worst_margin)
