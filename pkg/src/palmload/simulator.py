"""
Palm Monte-Carlo engine for typical-cell loads.

Each sample ``i`` draws its cell from its own generator
``default_rng(SeedSequence([seed, i]))``, so results do not depend on how
samples are spread over worker processes.

On the plane the load integral uses a polar tensor rule: ``angular_nodes``
rays and Gauss-Legendre nodes on ``[0, r(theta)]``. Interferers close to the
cell are summed directly; distant ones (``|x| >= FAR_RATIO * max r``) enter
through an exact power-law multipole expansion about the origin

    |z - x|^{-eta} = |x|^{-eta} sum_{j,k} c_j c_k (z/x)^j conj(z/x)^k,
    c_j = (eta/2)_j / j!,

which reduces the far field at all nodes to a small Hermitian form.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy import special

from .errors import CellTouchesWindow, ConfigError, DegenerateSamples, DomainError, NoRoot
from .geometry import DEFAULT_WINDOW_COUNT, CellRealization, Window, sample_typical_cell
from .numerics import gauss_legendre
from .shotnoise import MarkModel, PropagationModel
from .traffic import LoadIntegrand, RateModel, ReuseScheme, TrafficSpec, build_integrand

FAR_RATIO = 3.0
MULTIPOLE_ORDER = 20
MAX_REDRAWS = 1000
WORKERS_ENV = "PALMLOAD_WORKERS"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a load-sample set.

    ``integrand`` overrides the density built from ``traffic``/``rate``/
    ``reuse``; give it a distinct ``label`` so the digest tells runs apart.
    ``workers`` only affects speed and is excluded from the digest.
    """

    dimension: str = "plane"
    lam: float = 1.0
    prop: PropagationModel = field(default_factory=PropagationModel)
    marks: MarkModel = field(default_factory=MarkModel)
    traffic: Optional[TrafficSpec] = None
    rate: RateModel = field(default_factory=RateModel)
    reuse: ReuseScheme = field(default_factory=ReuseScheme)
    n_samples: int = 10_000
    window_count: float = DEFAULT_WINDOW_COUNT
    seed: int = 0
    angular_nodes: int = 256
    radial_nodes: int = 32
    tail_correction: bool = True
    integrand: Optional[LoadIntegrand] = field(default=None, compare=False)
    label: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.dimension not in ("line", "plane"):
            raise ConfigError(f"unknown dimension {self.dimension!r}")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigError("n_samples must be an integer >= 1")
        if self.angular_nodes < 16:
            raise ConfigError("angular_nodes must be >= 16")
        if self.radial_nodes < 1:
            raise ConfigError("radial_nodes must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.traffic is None and self.integrand is None:
            raise ConfigError("either traffic or an integrand is required")

    @property
    def window(self) -> Window:
        return Window.for_count(self.dimension, self.lam, self.window_count)

    def digest(self) -> str:
        return config_digest(_plain(self, skip=("workers", "integrand")))


def _plain(obj, skip=()):
    if is_dataclass(obj):
        out = {}
        for k in obj.__dataclass_fields__:
            if k in skip:
                continue
            v = getattr(obj, k)
            out[k] = "custom" if callable(v) and not is_dataclass(v) else _plain(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    return obj


def config_digest(doc) -> str:
    """SHA-256 of the canonical JSON form of ``doc``."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc


@dataclass
class LoadSamples:
    loads: np.ndarray
    cell_areas: np.ndarray
    rejected_cells: int
    seed: int
    config_digest: str
    lam: float = math.nan
    components: dict = field(default_factory=dict)
    flagged: list = field(default_factory=list)

    def __len__(self):
        return len(self.loads)

    @property
    def mean(self) -> float:
        return float(np.mean(self.loads))

    @property
    def stderr(self) -> float:
        n = len(self.loads)
        return float(np.std(self.loads, ddof=1) / math.sqrt(n)) if n > 1 else math.nan


@dataclass(frozen=True)
class GammaFit:
    k: float
    theta: float

    @property
    def mean(self) -> float:
        return self.k * self.theta

    @property
    def variance(self) -> float:
        return self.k * self.theta**2

    def quantile(self, q):
        return self.theta * special.gammaincinv(self.k, np.asarray(q, dtype=float))


# ---------------------------------------------------------------------------
# interference channels


@dataclass(frozen=True)
class Channel:
    """Interference seen on one frequency band.

    Every interferer carries marks ``(G, U)`` with ``U`` uniform; its edge
    band is ``floor(U b)``. The channel weight is ``G`` times the indicator
    that the edge band equals (``match``) or differs from ``band``.
    """

    b: int = 1
    band: int = 0
    match: bool = True

    def weights(self, marks: np.ndarray) -> np.ndarray:
        g = marks[:, 0]
        if self.b == 1:
            return g if self.match else np.zeros_like(g)
        bands = np.floor(marks[:, 1] * self.b)
        sel = (bands == self.band) if self.match else (bands != self.band)
        return g * sel

    def fraction(self) -> float:
        if self.b == 1:
            return 1.0 if self.match else 0.0
        return 1.0 / self.b if self.match else 1.0 - 1.0 / self.b


FULL = Channel()


class _ChannelMarks:
    """Draws ``(G, U)`` rows; ``U`` is always drawn so every reuse setting
    sees the same cells."""

    def __init__(self, marks: MarkModel):
        self.marks = marks

    def sample(self, rng, n):
        g = np.asarray(self.marks.sample(rng, n), dtype=float)
        return np.column_stack([g, rng.random(n)])


@dataclass
class _Evaluation:
    name: str
    integrand: LoadIntegrand
    coeffs: np.ndarray


def _soft_channels(b: int):
    return [Channel(b, 0, True), Channel(b, 0, False), Channel(b, 1, True), Channel(b, 1, False)]


def integrand_channels(integrand: LoadIntegrand):
    """Channels an integrand reads and the coefficients combining them.

    Edge users sit on band 0 where interferers with that edge band transmit
    at full power and the others at ``kappa``; center users are represented
    by band 1 with the same rule.
    """
    reuse = integrand.reuse
    if reuse.kind == "none":
        return [FULL], np.array([1.0])
    if reuse.kind == "hard":
        return [Channel(reuse.b, 0, True)], np.array([1.0])
    k = reuse.kappa
    coeffs = [1.0, k, 0.0, 0.0] if integrand.channel == "edge" else [0.0, 0.0, 1.0, k]
    return _soft_channels(reuse.b), np.array(coeffs)


def _plan(config: SimConfig):
    """Channels and named integrands for a configuration."""
    if config.integrand is not None:
        integs = [("load", config.integrand)]
    elif config.reuse.kind == "soft":
        integs = [(band, build_integrand(config.traffic, config.rate, config.prop, config.reuse, band)) for band in ("edge", "center")]
    else:
        integs = [("load", build_integrand(config.traffic, config.rate, config.prop, config.reuse, "full"))]
    channels, evaluations = [], []
    for name, integ in integs:
        chans, coeffs = integrand_channels(integ)
        channels = channels or chans
        evaluations.append(_Evaluation(name, integ, coeffs))
    return channels, evaluations


# ---------------------------------------------------------------------------
# per-cell quadrature


@dataclass
class CellNodes:
    """Quadrature nodes of one cell with the interference on each channel."""

    r: np.ndarray
    weights: np.ndarray
    fields: np.ndarray  # (n_channels, n_nodes)
    z: np.ndarray


def _plane_nodes(cell: CellRealization, radial: int):
    t, w = gauss_legendre(radial, 0.0, 1.0)
    radii = cell.radii
    r = radii[:, None] * t[None, :]
    wt = (radii**2 * cell.angle_weights)[:, None] * (t * w)[None, :]
    z = r * np.exp(1j * cell.angles)[:, None]
    return r.ravel(), wt.ravel(), z.ravel()


def _line_nodes(cell: CellRealization, radial: int):
    t, w = gauss_legendre(radial, 0.0, 1.0)
    a, b = 0.5 * cell.x_l, 0.5 * cell.x_r
    z = np.concatenate([-a * t, b * t])
    wt = np.concatenate([a * w, b * w])
    return np.abs(z), wt, z


def _multipole_coeffs(eta: float, order: int) -> np.ndarray:
    j = np.arange(order + 1)
    return np.exp(special.gammaln(eta / 2 + j) - special.gammaln(eta / 2) - special.gammaln(j + 1))


def _direct_fields(z, x, W, prop: PropagationModel, chunk: int = 1 << 20):
    out = np.zeros((W.shape[1], z.size))
    if x.size == 0:
        return out
    step = max(1, chunk // x.size)
    for s in range(0, z.size, step):
        d = np.abs(z[s : s + step, None] - x[None, :])
        out[:, s : s + step] = (prop.h(d) @ W).T
    return out


def _far_fields(z, x, W, prop: PropagationModel, scale: float):
    """Multipole evaluation for interferers with ``|x| >= FAR_RATIO * scale``."""
    K = MULTIPOLE_ORDER
    c = _multipole_coeffs(prop.eta, K)
    A = np.vander(scale / x, K + 1, increasing=True)
    base = prop.scale * np.abs(x) ** (-prop.eta)
    U = np.vander(z / scale, K + 1, increasing=True) * c[None, :]
    Uc = np.conj(U)
    out = np.empty((W.shape[1], z.size))
    for ch in range(W.shape[1]):
        M = (A * (W[:, ch] * base)[:, None]).T @ np.conj(A)
        out[ch] = np.einsum("mk,mk->m", U @ M, Uc).real
    return out


def _tail(config: SimConfig, channels) -> np.ndarray:
    if not config.tail_correction:
        return np.zeros(len(channels))
    prop, lam, size = config.prop, config.lam, config.window.size
    per_mark = lam * config.marks.mean
    if config.dimension == "plane":
        base = 2 * math.pi * per_mark * prop.H_plane(size)
    else:
        base = 2 * per_mark * prop.H_line(size)
    return base * np.array([ch.fraction() for ch in channels])


def cell_nodes(cell: CellRealization, config: SimConfig, channels=(FULL,), tail=None) -> CellNodes:
    """Quadrature nodes of ``cell`` and channel interference at each node."""
    prop = config.prop
    if cell.dimension == "plane":
        r, wt, z = _plane_nodes(cell, config.radial_nodes)
    else:
        r, wt, z = _line_nodes(cell, config.radial_nodes)
    pts = cell.interferers
    x = np.asarray(pts.positions, dtype=complex)
    if not len(channels):
        return CellNodes(r, wt, np.zeros((0, r.size)), z)
    marks = pts.marks if pts.marks.ndim == 2 else pts.marks[:, None]
    W = np.column_stack([ch.weights(marks) for ch in channels])
    if tail is None:
        tail = _tail(config, channels)
    rmax = float(np.max(np.abs(z)))
    if cell.dimension == "plane" and prop.is_power_law and prop.r_min <= (FAR_RATIO - 1) * rmax:
        far = np.abs(x) >= FAR_RATIO * rmax
        fields = _direct_fields(z, x[~far], W[~far], prop)
        if far.any():
            fields += _far_fields(z, x[far], W[far], prop, rmax)
    else:
        fields = _direct_fields(z, x, W, prop)
    fields += np.asarray(tail)[:, None]
    return CellNodes(r, wt, fields, z)


def _evaluate(nodes: CellNodes, evaluation: _Evaluation) -> float:
    integ = evaluation.integrand
    if integ.constant is not None:
        return integ.constant * float(nodes.weights.sum())
    if integ.tag == "no_interference":
        I = np.zeros_like(nodes.r)
    else:
        I = evaluation.coeffs @ nodes.fields
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return float(nodes.weights @ integ(nodes.r, I))


def _needs_field(evaluations) -> bool:
    return any(ev.integrand.tag != "no_interference" for ev in evaluations)


def integrate_load_over_cell(cell: CellRealization, integrand: LoadIntegrand, prop: PropagationModel, config: SimConfig) -> float:
    """Load ``int_C f(|z|, I(z)) dz`` of one realised cell.

    Constant densities give ``c`` times the ray-sum area without touching the
    interference field.
    """
    if integrand.constant is not None:
        return integrand.constant * cell.area
    cfg = config if config.prop is prop else replace(config, prop=prop)
    channels, coeffs = integrand_channels(integrand)
    ev = _Evaluation("load", integrand, coeffs)
    nodes = cell_nodes(cell, cfg, channels if _needs_field([ev]) else ())
    return _evaluate(nodes, ev)


# ---------------------------------------------------------------------------
# sampling


def sample_cell(config: SimConfig, index: int, marks=None):
    """Cell of sample ``index``; window-touching draws are redrawn from the
    same stream. Returns the cell and the number of rejections."""
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), int(index)]))
    marks = marks if marks is not None else _ChannelMarks(config.marks)
    window = config.window
    for rejected in range(MAX_REDRAWS):
        try:
            return sample_typical_cell(config.lam, window, rng, marks, config.angular_nodes), rejected
        except CellTouchesWindow:
            continue
    raise CellTouchesWindow(f"sample {index}: {MAX_REDRAWS} consecutive window-touching cells")


_WORKER_STATE: dict = {}


def _run_chunk(task):
    kind, start, stop = task
    state = _WORKER_STATE
    return state["fn"](state["config"], state["context"], start, stop)


def _map_chunks(fn, config: SimConfig, context, n: int, workers: int, chunk: int = 64):
    """Apply ``fn(config, context, start, stop)`` over index chunks, merged in
    index order."""
    tasks = [("chunk", s, min(s + chunk, n)) for s in range(0, n, chunk)]
    _WORKER_STATE.update(fn=fn, config=config, context=context)
    if workers <= 1 or len(tasks) <= 1:
        return [_run_chunk(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(_run_chunk, tasks))


def _simulate_chunk(config: SimConfig, context, start: int, stop: int):
    channels, evaluations, tail = context
    constant = all(ev.integrand.constant is not None for ev in evaluations)
    if not _needs_field(evaluations):
        channels, tail = (), np.zeros(0)
    out = []
    for i in range(start, stop):
        cell, rejected = sample_cell(config, i)
        if constant:
            values = [ev.integrand.constant * cell.area for ev in evaluations]
        else:
            nodes = cell_nodes(cell, config, channels, tail)
            values = [_evaluate(nodes, ev) for ev in evaluations]
        out.append((values, cell.area, rejected))
    return out


def simulate_load_distribution(config: SimConfig, workers: Optional[int] = None) -> LoadSamples:
    """``n_samples`` independent typical-cell loads."""
    channels, evaluations = _plan(config)
    tail = _tail(config, channels)
    workers = config.workers if workers is None else workers
    chunks = _map_chunks(_simulate_chunk, config, (channels, evaluations, tail), config.n_samples, workers)
    rows = [row for ch in chunks for row in ch]
    values = np.array([r[0] for r in rows], dtype=float)
    areas = np.array([r[1] for r in rows], dtype=float)
    rejected = int(sum(r[2] for r in rows))
    loads = values.sum(axis=1)
    components = {ev.name: values[:, j] for j, ev in enumerate(evaluations)} if len(evaluations) > 1 else {}
    flagged = [int(i) for i in np.flatnonzero(~np.isfinite(loads))]
    return LoadSamples(loads, areas, rejected, int(config.seed), config.digest(), config.lam, components, flagged)


def simulate_integrands(config: SimConfig, integrands: Mapping[str, LoadIntegrand], workers: Optional[int] = None) -> dict:
    """Loads of several densities on the same cells (common random numbers).

    All densities must read the same interference channels. Returns one
    :class:`LoadSamples` per name.
    """
    if not integrands:
        raise ConfigError("no integrands given")
    channels, evaluations = None, []
    for name, integ in integrands.items():
        chans, coeffs = integrand_channels(integ)
        if channels is not None and chans != channels:
            raise ConfigError("integrands read different interference channels")
        channels = chans
        evaluations.append(_Evaluation(name, integ, coeffs))
    tail = _tail(config, channels)
    workers = config.workers if workers is None else workers
    chunks = _map_chunks(_simulate_chunk, config, (channels, evaluations, tail), config.n_samples, workers)
    rows = [row for ch in chunks for row in ch]
    values = np.array([r[0] for r in rows], dtype=float)
    areas = np.array([r[1] for r in rows], dtype=float)
    rejected = int(sum(r[2] for r in rows))
    out = {}
    for j, ev in enumerate(evaluations):
        digest = config_digest({"config": config.digest(), "integrand": ev.name})
        loads = values[:, j]
        flagged = [int(i) for i in np.flatnonzero(~np.isfinite(loads))]
        out[ev.name] = LoadSamples(loads, areas, rejected, int(config.seed), digest, config.lam, {}, flagged)
    return out


# ---------------------------------------------------------------------------
# distribution analysis


def _values(samples) -> np.ndarray:
    return np.asarray(samples.loads if isinstance(samples, LoadSamples) else samples, dtype=float)


def fit_gamma_moments(samples) -> GammaFit:
    """Gamma law with the sample mean and variance."""
    x = _values(samples)
    if x.size < 2:
        raise DegenerateSamples("at least two samples are needed")
    m, v = float(x.mean()), float(x.var(ddof=1))
    if not v > 0 or not m > 0:
        raise DegenerateSamples("samples have zero variance or a nonpositive mean")
    return GammaFit(m * m / v, v / m)


def qq_points(samples, fit: GammaFit, n_quantiles: int = 99):
    """``(level, empirical quantile, gamma quantile)`` at levels ``(i - 1/2)/n``."""
    if n_quantiles < 2:
        raise DomainError("n_quantiles must be >= 2")
    x = _values(samples)
    levels = (np.arange(1, n_quantiles + 1) - 0.5) / n_quantiles
    return levels, np.quantile(x, levels), fit.quantile(levels)


def qq_correlation(samples, fit: Optional[GammaFit] = None, lo: float = 0.01, hi: float = 0.99, n: int = 99) -> float:
    """Correlation of empirical and fitted quantiles on ``[lo, hi]``."""
    fit = fit or fit_gamma_moments(samples)
    levels = np.linspace(lo, hi, n)
    emp = np.quantile(_values(samples), levels)
    return float(np.corrcoef(emp, fit.quantile(levels))[0, 1])


def stationary_from_palm(samples: LoadSamples, F: Callable) -> tuple[float, float]:
    """``lambda E0[F(rho) |C|]`` with its standard error."""
    if samples.cell_areas is None or len(samples.cell_areas) != len(samples.loads):
        raise DomainError("cell areas were not recorded")
    terms = samples.lam * np.asarray(F(samples.loads), dtype=float) * samples.cell_areas
    n = terms.size
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan


# ---------------------------------------------------------------------------
# frequency reuse


@dataclass
class _SoftBins:
    edges: np.ndarray
    edge: np.ndarray  # (n_kappa, n_bins) pooled edge-density mass per radius bin
    center: np.ndarray


def _radius_bins(lam: float, n: int = 4096) -> np.ndarray:
    return np.linspace(0.0, 6.0 / math.sqrt(lam), n + 1)


def _soft_integrands(config: SimConfig, b: int, kappas: Sequence[float]):
    """Edge and center densities without the radial indicator."""
    out = []
    for k in kappas:
        edge = build_integrand(config.traffic, config.rate, config.prop, ReuseScheme.soft(b, k, 0.0), "edge")
        center = build_integrand(config.traffic, config.rate, config.prop, ReuseScheme.soft(b, k, math.inf), "center")
        out.append((k, edge, center))
    return out


def _soft_fields(nodes: CellNodes, k: float):
    f = nodes.fields
    return f[0] + k * f[1], f[2] + k * f[3]


def _bin_chunk(config: SimConfig, context, start: int, stop: int):
    b, soft, edges, tail = context
    channels = _soft_channels(b)
    n_bins = edges.size - 1
    acc_e = np.zeros((len(soft), n_bins))
    acc_c = np.zeros((len(soft), n_bins))
    for i in range(start, stop):
        cell, _ = sample_cell(config, i)
        nodes = cell_nodes(cell, config, channels, tail)
        idx = np.minimum(np.searchsorted(edges, nodes.r, side="right") - 1, n_bins - 1)
        for j, (k, edge, center) in enumerate(soft):
            Ie, Ic = _soft_fields(nodes, k)
            with np.errstate(over="ignore", invalid="ignore"):
                acc_e[j] += np.bincount(idx, nodes.weights * edge(nodes.r, Ie), minlength=n_bins)
                acc_c[j] += np.bincount(idx, nodes.weights * center(nodes.r, Ic), minlength=n_bins)
    return acc_e, acc_c


def _pooled_bins(config: SimConfig, b: int, kappas, workers: int) -> _SoftBins:
    soft = _soft_integrands(config, b, kappas)
    edges = _radius_bins(config.lam)
    tail = _tail(config, _soft_channels(b))
    parts = _map_chunks(_bin_chunk, config, (b, soft, edges, tail), config.n_samples, workers)
    acc_e = sum(p[0] for p in parts) / config.n_samples
    acc_c = sum(p[1] for p in parts) / config.n_samples
    return _SoftBins(edges, acc_e, acc_c)


def _balance_from_bins(edges, edge_mass, center_mass, tol: float) -> float:
    """Threshold where pooled edge and center loads agree.

    Mass inside a radius bin is spread linearly over it, so both pooled loads
    are continuous and monotone in ``r_edge``.
    """
    cum_e = np.concatenate([[0.0], np.cumsum(edge_mass)])
    cum_c = np.concatenate([[0.0], np.cumsum(center_mass)])

    def gap(r):
        return (cum_e[-1] - np.interp(r, edges, cum_e)) - np.interp(r, edges, cum_c)

    lo, hi = 0.0, float(edges[-1])
    if not (gap(lo) > 0 > gap(hi)):
        raise NoRoot("edge and center loads never balance")
    total = cum_e[-1] + cum_c[-1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if abs(g) < 1e-3 * tol * total:
            return mid
        lo, hi = (mid, hi) if g > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def balance_edge_threshold(config: SimConfig, tol: float = 1e-2, workers: Optional[int] = None) -> float:
    """``r_edge`` equalising the mean edge and center loads of a soft scheme."""
    reuse = config.reuse
    if reuse.kind != "soft":
        raise ConfigError("balancing needs a soft reuse scheme")
    workers = config.workers if workers is None else workers
    bins = _pooled_bins(config, reuse.b, [reuse.kappa], workers)
    return _balance_from_bins(bins.edges, bins.edge[0], bins.center[0], tol)


@dataclass
class SweepRow:
    scheme: str
    b: int
    kappa_dB: float
    r_edge: float
    mean: float
    stderr: float
    diff_vs_baseline: float
    diff_stderr: float
    mean_edge: float = math.nan
    mean_center: float = math.nan


@dataclass
class SweepResult:
    rows: list
    baseline: np.ndarray
    per_cell: dict

    def soft_rows(self):
        return [r for r in self.rows if r.scheme == "soft"]

    def argmin(self) -> SweepRow:
        return min(self.soft_rows(), key=lambda r: r.mean)


def _hard_chunk(config: SimConfig, context, start: int, stop: int):
    bs, integrands, tail = context
    channels = [FULL] + [Channel(b, 0, True) for b in bs]
    out = np.empty((stop - start, len(channels)))
    for i in range(start, stop):
        cell, _ = sample_cell(config, i)
        nodes = cell_nodes(cell, config, channels, tail)
        for j, integ in enumerate(integrands):
            out[i - start, j] = _evaluate(nodes, _Evaluation("", integ, np.eye(len(channels))[j]))
    return out


def _soft_chunk(config: SimConfig, context, start: int, stop: int):
    b, soft, r_edges, tail = context
    channels = _soft_channels(b)
    out = np.empty((stop - start, len(soft), 2))
    for i in range(start, stop):
        cell, _ = sample_cell(config, i)
        nodes = cell_nodes(cell, config, channels, tail)
        for j, ((k, edge, center), re) in enumerate(zip(soft, r_edges)):
            Ie, Ic = _soft_fields(nodes, k)
            outer = nodes.r >= re
            with np.errstate(over="ignore", invalid="ignore"):
                e = nodes.weights[outer] @ edge(nodes.r[outer], Ie[outer])
                c = nodes.weights[~outer] @ center(nodes.r[~outer], Ic[~outer])
            out[i - start, j] = (e, c)
    return out


def _summary(x):
    n = x.size
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan


def reuse_sweep(
    config: SimConfig,
    b: int = 3,
    kappa_grid_dB: Sequence[float] = tuple(range(-40, 1, 5)),
    hard_b: Sequence[int] = (2, 3, 4),
    tol: float = 1e-2,
    workers: Optional[int] = None,
) -> SweepResult:
    """Baseline, hard reuse and balanced soft reuse on common cells.

    Every scheme is evaluated on the same sampled cells, so differences to
    the baseline carry paired standard errors.
    """
    if len(kappa_grid_dB) == 0:
        raise DomainError("kappa grid is empty")
    if config.traffic is None:
        raise ConfigError("reuse sweeps need a traffic specification")
    workers = config.workers if workers is None else workers
    base = replace(config, reuse=ReuseScheme())

    integrands = [build_integrand(base.traffic, base.rate, base.prop)]
    integrands += [build_integrand(base.traffic, base.rate, base.prop, ReuseScheme.hard(hb), "full") for hb in hard_b]
    channels = [FULL] + [Channel(hb, 0, True) for hb in hard_b]
    hard = np.concatenate(_map_chunks(_hard_chunk, base, (tuple(hard_b), integrands, _tail(base, channels)), base.n_samples, workers))
    baseline = hard[:, 0]
    rows = [SweepRow("none", 1, 0.0, math.nan, *_summary(baseline), 0.0, 0.0)]
    per_cell = {"none": baseline}
    for j, hb in enumerate(hard_b, start=1):
        d = hard[:, j] - baseline
        rows.append(SweepRow("hard", hb, -math.inf, 0.0, *_summary(hard[:, j]), *_summary(d)))
        per_cell[f"hard{hb}"] = hard[:, j]

    kappas = [10.0 ** (k / 10.0) for k in kappa_grid_dB]
    bins = _pooled_bins(base, b, kappas, workers)
    r_edges = [_balance_from_bins(bins.edges, bins.edge[j], bins.center[j], tol) for j in range(len(kappas))]
    soft = _soft_integrands(base, b, kappas)
    parts = _map_chunks(_soft_chunk, base, (b, soft, r_edges, _tail(base, _soft_channels(b))), base.n_samples, workers)
    loads = np.concatenate(parts)
    for j, kd in enumerate(kappa_grid_dB):
        tot = loads[:, j, 0] + loads[:, j, 1]
        d = tot - baseline
        rows.append(
            SweepRow("soft", b, float(kd), r_edges[j], *_summary(tot), *_summary(d), float(loads[:, j, 0].mean()), float(loads[:, j, 1].mean()))
        )
        per_cell[f"soft{kd:g}"] = tot
    return SweepResult(rows, baseline, per_cell)
