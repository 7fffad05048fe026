"""
Command-line experiment runner.

    palmload analytic|simulate|compare|reuse --config exp.json --out dir
             [--seed N] [--workers N]

The configuration is one JSON document validated against :data:`SCHEMA`.
Every file written carries the digest of the (seed-resolved) configuration.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .errors import (
    BudgetExceeded,
    ConfigError,
    DegenerateSamples,
    Diverges,
    DomainError,
    NoConvergence,
    NonConvergent,
    NoRoot,
    NumericOverflow,
    PalmLoadError,
    StrategyMismatch,
    Unstable,
)
from .line import line_mean_load, line_transform
from .plane import interference_free, plane_mean_load, plane_second_moment
from .shotnoise import MarkModel, PropagationModel
from .simulator import (
    SimConfig,
    config_digest,
    default_workers,
    fit_gamma_moments,
    qq_points,
    reuse_sweep,
    simulate_load_distribution,
)
from .traffic import RateModel, ReuseScheme, TrafficSpec, build_integrand, dbm_to_mw, reuse_mark_model

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGES, EXIT_IO = 0, 2, 3, 4

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["network", "traffic"],
    "properties": {
        "network": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lambda", "eta"],
            "properties": {
                "dimension": {"enum": ["plane", "line"]},
                "lambda": _POS,
                "eta": _POS,
                "P": _POS,
                "P_rule": {"enum": ["km_128dB", "unit"]},
                "r_min": {"type": "number", "minimum": 0},
                "tx_power_dBm": _NUM,
                "N0_dBm_per_Hz": {"type": ["number", "null"]},
                "shadowing": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["none", "lognormal"]},
                        "mean_dB": _NUM,
                        "std_dB": {"type": "number", "minimum": 0},
                    },
                },
                "window_count": _POS,
            },
            "not": {"required": ["P", "P_rule"]},
        },
        "traffic": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["voice", "streaming", "adaptive", "elastic"]},
                "parameters": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "lam_us": _POS,
                        "mu": _POS,
                        "C": {"type": "integer", "minimum": 1},
                        "R_min": {"type": "number", "minimum": 0},
                        "sigma": _POS,
                    },
                },
            },
        },
        "rate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["shannon", "modified_shannon", "linear", "rayleigh"]},
                "w_Hz": _POS,
                "w_scale": _POS,
                "s_scale": _POS,
                "best_channel_gain": {"type": "number", "minimum": 1},
            },
        },
        "reuse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["none", "hard", "soft"]},
                "b": {"type": "integer", "minimum": 1},
                "kappa_dB": {"type": "number", "maximum": 0},
                "r_edge": {"type": "number", "minimum": 0},
                "kappa_grid_dB": {"type": "array", "items": {"type": "number", "maximum": 0}, "minItems": 1},
                "hard_b": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            },
        },
        "run": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "outputs": {"type": "array", "items": {"enum": ["csv", "svg"]}},
                "angular_nodes": {"type": "integer", "minimum": 16},
                "radial_nodes": {"type": "integer", "minimum": 1},
                "lambda_grid": {"type": "array", "items": _POS, "minItems": 1},
                "laplace_s_grid": {"type": "array", "items": _POS, "minItems": 1},
                "strategy": {"enum": ["affine_exact", "gaussian_approx", "transform_inversion", "mean_field"]},
                "quantiles": {"type": "integer", "minimum": 2},
            },
        },
    },
}

DEFAULTS = {
    "network": {
        "dimension": "plane",
        "r_min": 0.0,
        "tx_power_dBm": 46.0,
        "N0_dBm_per_Hz": -174.0,
        "shadowing": {"kind": "none"},
        "window_count": 3000.0,
    },
    "traffic": {"parameters": {}},
    "rate": {"kind": "shannon", "w_Hz": 5e6},
    "reuse": {"kind": "none", "b": 1, "hard_b": [2, 3, 4]},
    "run": {
        "n_samples": 10000,
        "seed": 0,
        "outputs": ["csv", "svg"],
        "angular_nodes": 256,
        "radial_nodes": 32,
        "lambda_grid": [0.5, 1.0, 2.0, 4.0],
        "laplace_s_grid": [0.01, 0.1, 1.0, 10.0, 100.0],
        "quantiles": 99,
    },
}


# ---------------------------------------------------------------------------
# configuration


def _merge(defaults: dict, doc: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in doc.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def load_config(path, seed: Optional[int] = None) -> dict:
    """Read, validate and complete a configuration document."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return validate_config(doc, seed)


def validate_config(doc: dict, seed: Optional[int] = None) -> dict:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, doc)
    if seed is not None:
        cfg["run"]["seed"] = int(seed)
    if cfg["reuse"]["kind"] == "soft" and "kappa_dB" not in cfg["reuse"] and "kappa_grid_dB" not in cfg["reuse"]:
        raise ConfigError("soft reuse needs kappa_dB or kappa_grid_dB")
    return cfg


@dataclass
class Models:
    prop: PropagationModel
    marks: MarkModel
    traffic: TrafficSpec
    rate: RateModel
    reuse: ReuseScheme
    lam: float
    dimension: str


def build_models(cfg: dict) -> Models:
    net, tr, rt, ru = cfg["network"], cfg["traffic"], cfg["rate"], cfg["reuse"]
    if "P" in net:
        P = float(net["P"])
    elif net.get("P_rule", "km_128dB") == "km_128dB":
        P = 10.0 ** (-12.8)
    else:
        P = 1.0
    n0 = net["N0_dBm_per_Hz"]
    prop = PropagationModel(
        "power_law",
        P=P,
        eta=float(net["eta"]),
        r_min=float(net["r_min"]),
        tx_power=dbm_to_mw(net["tx_power_dBm"]),
        noise_density=0.0 if n0 is None else dbm_to_mw(n0),
        bandwidth=float(rt["w_Hz"]),
    )
    sh = net["shadowing"]
    if sh["kind"] == "lognormal":
        marks = MarkModel("lognormal", mean_dB=float(sh.get("mean_dB", 0.0)), std_dB=float(sh.get("std_dB", 0.0)))
    else:
        marks = MarkModel()
    params = dict(tr.get("parameters", {}))
    params.setdefault("lam_us", 1e7 if tr["kind"] == "elastic" else 1.0)
    traffic = TrafficSpec(tr["kind"], **params)
    rate = RateModel(
        rt["kind"],
        float(rt["w_Hz"]),
        **{k: float(rt[k]) for k in ("w_scale", "s_scale", "best_channel_gain") if k in rt},
    )
    if ru["kind"] == "none":
        reuse = ReuseScheme()
    elif ru["kind"] == "hard":
        reuse = ReuseScheme.hard(int(ru["b"]))
    else:
        kappa = 10.0 ** (float(ru.get("kappa_dB", ru.get("kappa_grid_dB", [0.0])[0])) / 10.0)
        reuse = ReuseScheme.soft(int(ru["b"]), kappa, float(ru.get("r_edge", 0.0)))
    return Models(prop, marks, traffic, rate, reuse, float(net["lambda"]), net["dimension"])


def digest_of(cfg: dict) -> str:
    return config_digest(cfg)


def sim_config(cfg: dict, models: Models, workers: int, lam: Optional[float] = None) -> SimConfig:
    run = cfg["run"]
    return SimConfig(
        dimension=models.dimension,
        lam=models.lam if lam is None else lam,
        prop=models.prop,
        marks=models.marks,
        traffic=models.traffic,
        rate=models.rate,
        reuse=models.reuse,
        n_samples=int(run["n_samples"]),
        window_count=float(cfg["network"]["window_count"]),
        seed=int(run["seed"]),
        angular_nodes=int(run["angular_nodes"]),
        radial_nodes=int(run["radial_nodes"]),
        workers=workers,
    )


# ---------------------------------------------------------------------------
# tables and files


@dataclass
class ResultTable:
    """Rows with a unit per column and provenance metadata."""

    columns: list  # (name, unit)
    rows: list
    metadata: dict = field(default_factory=dict)

    @property
    def names(self):
        return [c[0] for c in self.columns]

    def column(self, name):
        j = self.names.index(name)
        return [row[j] for row in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO(newline="")
        buf.write(f"# config_digest: {self.metadata.get('config_digest', '')}\n")
        buf.write(f"# tool: palmload {__version__}\n")
        buf.write("# units: " + ",".join(u or "-" for _, u in self.columns) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def svg_plot(series, title: str, xlabel: str, ylabel: str, digest: str, diagonal: bool = False) -> str:
    """Minimal static SVG. ``series`` is a list of ``(label, xs, ys, style)``
    with style ``points`` or ``line``."""
    W, H, m = 480, 360, 50
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    ok = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[ok], ys[ok]
    if diagonal and xs.size:
        lo, hi = min(xs.min(), ys.min()), max(xs.max(), ys.max())
        x0, x1, y0, y1 = lo, hi, lo, hi
    else:
        x0, x1 = (xs.min(), xs.max()) if xs.size else (0.0, 1.0)
        y0, y1 = (ys.min(), ys.max()) if ys.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0

    def px(x):
        return m + (x - x0) / (x1 - x0) * (W - 2 * m)

    def py(y):
        return H - m - (y - y0) / (y1 - y0) * (H - 2 * m)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- config_digest: {digest} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{m}" y1="{H - m}" x2="{W - m}" y2="{H - m}" stroke="black"/>',
        f'<line x1="{m}" y1="{m}" x2="{m}" y2="{H - m}" stroke="black"/>',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {H / 2})">{_esc(ylabel)}</text>',
        f'<text x="{m}" y="{H - m + 15}" font-size="10">{x0:.3g}</text>',
        f'<text x="{W - m}" y="{H - m + 15}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{m - 4}" y="{H - m}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{m - 4}" y="{m + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]
    if diagonal:
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(x0):.2f}" x2="{px(x1):.2f}" y2="{py(x1):.2f}" stroke="gray" stroke-dasharray="4 3"/>')
    for i, (label, sx, sy, style) in enumerate(series):
        col = colors[i % len(colors)]
        pts = [(px(a), py(b)) for a, b in zip(sx, sy) if np.isfinite(a) and np.isfinite(b)]
        if style == "line" and pts:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{col}"/>')
        out.append(f'<text x="{W - m - 4}" y="{m + 14 * (i + 1)}" font-size="11" text-anchor="end" fill="{col}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _emit(out_dir: Path, name: str, table: ResultTable):
    _write(out_dir / name, table.to_csv())


def _emit_meta(out_dir: Path, command: str, digest: str, started: float, cfg: dict):
    meta = {
        "command": command,
        "config_digest": digest,
        "tool": f"palmload {__version__}",
        "wall_time_s": round(time.time() - started, 3),
        "config": cfg,
    }
    _write(out_dir / "run.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_analytic(cfg: dict, workers: int = 1) -> ResultTable:
    """Mean, second moment and variance (plane) or mean and Laplace
    transform samples (line)."""
    models = build_models(cfg)
    digest = digest_of(cfg)
    reuse = models.reuse
    rows = []
    if models.dimension == "plane" and reuse.kind != "none":
        if models.marks.kind != "deterministic" or models.marks.g0 != 1:
            raise ConfigError("analytic reuse results assume no shadowing")
        marks = reuse_mark_model(reuse)
        bands = ("edge", "center") if reuse.kind == "soft" else ("full",)
        strategy = cfg["run"].get("strategy")
        for band in bands:
            integ = build_integrand(models.traffic, models.rate, models.prop, reuse, band)
            name = "mean" if band == "full" else f"mean_{band}"
            rows.append((name, None, plane_mean_load(integ, models.lam, models.prop, marks, strategy)))
    elif models.dimension == "plane":
        integ = build_integrand(models.traffic, models.rate, models.prop)
        strategy = cfg["run"].get("strategy")
        mean = plane_mean_load(integ, models.lam, models.prop, models.marks, strategy)
        rows.append(("mean", None, mean))
        try:
            m2 = plane_second_moment(integ, models.lam, models.prop, models.marks, strategy)
        except StrategyMismatch:
            m2 = math.nan
        rows.append(("second_moment", None, m2))
        rows.append(("variance", None, m2 - mean * mean if math.isfinite(m2) else math.nan))
    else:
        if reuse.kind != "none":
            raise ConfigError("reuse is supported on plane networks only")
        integ = build_integrand(models.traffic, models.rate, models.prop)
        if integ.tag == "general":
            raise ConfigError("line networks need an affine or interference-free load density")
        f1 = integ.f1 if integ.tag == "affine" else None
        mean = line_mean_load(integ.f0, f1, models.lam, models.prop, models.marks)
        rows.append(("mean", None, mean))
        transform = line_transform(integ, models.lam, models.prop, models.marks)
        for s in cfg["run"]["laplace_s_grid"]:
            rows.append(("laplace", float(s), float(complex(transform(s)).real)))
    return ResultTable(
        [("quantity", ""), ("s", "1/load"), ("value", "load or dimensionless")],
        rows,
        {"config_digest": digest},
    )


@dataclass
class SimulationOutput:
    summary: ResultTable
    loads: ResultTable
    qq: ResultTable
    svg: str


def cmd_simulate(cfg: dict, workers: int = 1) -> SimulationOutput:
    models = build_models(cfg)
    digest = digest_of(cfg)
    samples = simulate_load_distribution(sim_config(cfg, models, workers))
    if samples.flagged:
        raise NumericOverflow(f"non-finite load in samples {samples.flagged[:10]}")
    n = len(samples)
    loads = ResultTable(
        [("sample_index", ""), ("load", "load"), ("cell_area_km2", "km2")],
        [(i, float(samples.loads[i]), float(samples.cell_areas[i])) for i in range(n)],
        {"config_digest": digest},
    )
    mean = float(samples.loads.mean())
    var = float(samples.loads.var(ddof=1)) if n > 1 else None
    stderr = math.sqrt(var / n) if var is not None else None
    try:
        fit = fit_gamma_moments(samples)
    except DegenerateSamples:
        fit = None
    summary = ResultTable(
        [("mean", "load"), ("var", "load2"), ("stderr", "load"), ("gamma_k", ""), ("gamma_theta", "load"), ("rejected_cells", "")],
        [(mean, var, stderr, fit.k if fit else None, fit.theta if fit else None, samples.rejected_cells)],
        {"config_digest": digest},
    )
    levels = (np.arange(1, cfg["run"]["quantiles"] + 1) - 0.5) / cfg["run"]["quantiles"]
    if fit is not None:
        levels, emp, gq = qq_points(samples, fit, cfg["run"]["quantiles"])
    else:
        emp, gq = np.quantile(samples.loads, levels), np.full(levels.size, math.nan)
    qq = ResultTable(
        [("level", ""), ("empirical_q", "load"), ("gamma_q", "load")],
        [(float(a), float(b), float(c)) for a, b, c in zip(levels, emp, gq)],
        {"config_digest": digest},
    )
    svg = svg_plot([("quantiles", gq, emp, "points")], "Q-Q: loads vs moment-fit gamma", "gamma quantile", "empirical quantile", digest, diagonal=True)
    return SimulationOutput(summary, loads, qq, svg)


def cmd_compare(cfg: dict, workers: int = 1, lambda_grid=None) -> ResultTable:
    """Mean load per density: exact, mean-field, Gaussian, no interference,
    Monte-Carlo."""
    models = build_models(cfg)
    if models.dimension != "plane":
        raise ConfigError("compare runs on plane networks")
    digest = digest_of(cfg)
    grid = list(lambda_grid if lambda_grid is not None else cfg["run"]["lambda_grid"])
    integ = build_integrand(models.traffic, models.rate, models.prop)
    exact = "affine_exact" if integ.tag != "general" else "transform_inversion"
    approx = ("mean_field", "gaussian_approx") if integ.tag == "general" else ("affine_exact", "affine_exact")
    rows = []
    for lam in grid:
        args = (lam, models.prop, models.marks)
        a = plane_mean_load(integ, *args, exact)
        b = plane_mean_load(integ, *args, approx[0])
        c = plane_mean_load(integ, *args, approx[1])
        d = plane_mean_load(interference_free(integ), *args)
        s = simulate_load_distribution(replace(sim_config(cfg, models, workers, lam=lam), reuse=ReuseScheme()))
        rows.append((lam, a, b, c, d, s.mean, s.stderr))
    return ResultTable(
        [
            ("lambda_per_km2", "1/km2"),
            ("analytic", "load"),
            ("mean_field", "load"),
            ("gaussian", "load"),
            ("no_interference", "load"),
            ("mc_mean", "load"),
            ("mc_stderr", "load"),
        ],
        rows,
        {"config_digest": digest},
    )


@dataclass
class ReuseOutput:
    table: ResultTable
    best: ResultTable
    svg: str


def cmd_reuse(cfg: dict, workers: int = 1) -> ReuseOutput:
    models = build_models(cfg)
    digest = digest_of(cfg)
    ru = cfg["reuse"]
    b = int(ru["b"]) if ru["kind"] == "soft" else 3
    grid = ru.get("kappa_grid_dB", list(range(-40, 1, 5)))
    base = sim_config(cfg, models, workers)
    res = reuse_sweep(base, b, grid, tuple(ru["hard_b"]), workers=workers)
    cols = [
        ("scheme", ""),
        ("b", ""),
        ("kappa_dB", "dB"),
        ("r_edge_km", "km"),
        ("mean", "load"),
        ("stderr", "load"),
        ("diff_vs_baseline", "load"),
        ("diff_stderr", "load"),
        ("mean_edge", "load"),
        ("mean_center", "load"),
    ]
    rows = []
    for r in res.rows:
        kd = None if r.scheme == "hard" else r.kappa_dB
        re = None if r.scheme == "none" else r.r_edge
        rows.append((r.scheme, r.b, kd, re, r.mean, r.stderr, r.diff_vs_baseline, r.diff_stderr, r.mean_edge, r.mean_center))
    table = ResultTable(cols, rows, {"config_digest": digest})
    best = res.argmin()
    base_mean = res.rows[0].mean
    best_table = ResultTable(
        [
            ("argmin_kappa_dB", "dB"),
            ("min_mean", "load"),
            ("ci95_low", "load"),
            ("ci95_high", "load"),
            ("ratio_to_baseline", ""),
            ("diff_vs_baseline", "load"),
            ("diff_stderr", "load"),
        ],
        [(best.kappa_dB, best.mean, best.mean - 1.96 * best.stderr, best.mean + 1.96 * best.stderr, best.mean / base_mean, best.diff_vs_baseline, best.diff_stderr)],
        {"config_digest": digest},
    )
    soft = res.soft_rows()
    series = [
        ("soft reuse b=%d" % b, [r.kappa_dB for r in soft], [r.mean for r in soft], "line"),
        ("reuse 1", [soft[0].kappa_dB, soft[-1].kappa_dB], [base_mean, base_mean], "line"),
    ]
    svg = svg_plot(series, "Mean load vs kappa", "kappa (dB)", "mean load", digest)
    return ReuseOutput(table, best_table, svg)


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="palmload", description="Base-station load in Poisson networks.")
    p.add_argument("command", choices=["analytic", "simulate", "compare", "reuse"])
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override run.seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default from PALMLOAD_WORKERS)")
    return p


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    started = time.time()
    try:
        workers = args.workers if args.workers is not None else default_workers()
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        digest = digest_of(cfg)
        want_svg = "svg" in cfg["run"]["outputs"]
        want_csv = "csv" in cfg["run"]["outputs"]
        if args.command == "analytic":
            table = cmd_analytic(cfg, workers)
            if want_csv:
                _emit(out, "analytic.csv", table)
        elif args.command == "simulate":
            res = cmd_simulate(cfg, workers)
            if want_csv:
                _emit(out, "loads.csv", res.loads)
                _emit(out, "qq.csv", res.qq)
                _emit(out, "summary.csv", res.summary)
            if want_svg:
                _write(out / "qq.svg", res.svg)
        elif args.command == "compare":
            table = cmd_compare(cfg, workers)
            if want_csv:
                _emit(out, "compare.csv", table)
            if want_svg:
                lam = table.column("lambda_per_km2")
                series = [(name, lam, table.column(name), "line") for name in ("analytic", "mean_field", "gaussian", "no_interference", "mc_mean")]
                _write(out / "compare.svg", svg_plot(series, "Mean load vs density", "lambda (1/km2)", "mean load", digest))
        else:
            res = cmd_reuse(cfg, workers)
            if want_csv:
                _emit(out, "reuse.csv", res.table)
                _emit(out, "reuse_best.csv", res.best)
            if want_svg:
                _write(out / "reuse.svg", res.svg)
        _emit_meta(out, args.command, digest, started, cfg)
    except OSError as exc:
        print(f"palmload: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (Diverges, NonConvergent, NumericOverflow, NoRoot, NoConvergence, Unstable, BudgetExceeded) as exc:
        print(f"palmload: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DIVERGES
    except (ConfigError, DomainError, StrategyMismatch) as exc:
        print(f"palmload: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PalmLoadError as exc:
        print(f"palmload: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DIVERGES
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
