"""
Palm moments of the load for base stations on the plane.

First moment: ``2 pi int_0^inf r K(r) exp(-lam pi r^2) dr`` with
``K(r) = E[f(r, I(r)) | r in C(0)]``.

Second moment: with ``z = r`` and ``z' = r t e^{i theta}`` (``t >= 1``),

    8 pi int_1^inf t dt int_0^pi dtheta int_0^inf r^3 L exp(-lam r^2 B(t, theta)) dr,

``B(t, theta) = B_2(1, t e^{i theta})``. The radial integral is written in
``v = lam B r^2`` and evaluated with generalized Gauss-Laguerre nodes; ``t``
is mapped to ``u = 1/t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import special, stats

from .errors import BudgetExceeded, DomainError, Diverges, NonConvergent, StrategyMismatch
from .geometry import covered_area_batch, covered_area_pair
from .numerics import DEFAULT_SPEC, QuadratureSpec, Smooth, expectation_via_transform, integrate
from .shotnoise import (
    MarkModel,
    PropagationModel,
    conditional_char_fn,
    conditional_moments,
    exterior_nodes,
    gaussian_limit_params,
    ExclusionRegion,
)
from .traffic import LN2, LoadIntegrand

STRATEGIES = ("affine_exact", "gaussian_approx", "transform_inversion", "mean_field")


@dataclass(frozen=True)
class ConditionalExpectationStrategy:
    kind: str = "affine_exact"

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise DomainError(f"unknown strategy {self.kind!r}")


def default_strategy(integrand: LoadIntegrand) -> str:
    return "affine_exact" if integrand.tag in ("affine", "no_interference") else "gaussian_approx"


def _strategy_kind(strategy, integrand) -> str:
    if strategy is None:
        return default_strategy(integrand)
    kind = strategy.kind if isinstance(strategy, ConditionalExpectationStrategy) else str(strategy)
    if kind not in STRATEGIES:
        raise DomainError(f"unknown strategy {kind!r}")
    if kind == "affine_exact" and integrand.tag == "general":
        raise StrategyMismatch("affine_exact needs an affine or interference-free integrand")
    return kind


@lru_cache(maxsize=None)
def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@lru_cache(maxsize=None)
def _gh(n):
    x, w = special.roots_hermite(n)
    return x * math.sqrt(2.0), w / math.sqrt(math.pi)


def _gaussian_expectation(f, r, m, sd, n: int = 64):
    """``E[f(r, max(X, 0))]`` for ``X ~ N(m, sd^2)``."""
    if sd <= 0:
        return float(f(np.asarray(r), np.asarray(max(m, 0.0))))
    lo, hi = max(0.0, m - 10 * sd), m + 10 * sd
    if hi <= 0:
        return float(f(np.asarray(r), np.asarray(0.0)))
    t, w = _gl01(n)
    x = lo + (hi - lo) * t
    dens = stats.norm.pdf(x, m, sd)
    val = (hi - lo) * np.sum(w * dens * f(np.full_like(x, r), x))
    mass0 = stats.norm.cdf(-m / sd)
    if mass0 > 0:
        val += mass0 * float(f(np.asarray(r), np.asarray(0.0)))
    return float(val)


def conditional_expectation(
    r: float,
    integrand: LoadIntegrand,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    strategy=None,
) -> float:
    """``K(r) = E[f(r, I(r)) | r in C(0)]`` under a strategy."""
    kind = _strategy_kind(strategy, integrand)
    ra = np.asarray(r, dtype=float)
    if integrand.tag == "no_interference":
        return float(integrand.f0(ra))
    m, v = conditional_moments(r, lam, prop, marks)
    if integrand.tag == "affine" and kind in ("affine_exact", "gaussian_approx"):
        # a Gaussian with the exact mean reproduces an affine integrand exactly
        return float(integrand.f0(ra) + integrand.f1(ra) * m)
    if kind == "mean_field":
        return float(integrand.f(ra, np.asarray(m)))
    if kind == "gaussian_approx":
        return _gaussian_expectation(integrand.f, r, m, math.sqrt(v))
    if kind == "transform_inversion":
        g = Smooth(
            lambda x: integrand.f(np.full(np.shape(x), r), np.asarray(x)),
            lambda x: integrand.derivative(np.full(np.shape(x), r), np.asarray(x)),
            location=m,
            spread=math.sqrt(v),
        )
        return expectation_via_transform(conditional_char_fn(r, lam, prop, marks), g)
    raise StrategyMismatch(kind)


def _u_breakpoints(integrand: LoadIntegrand, lam: float):
    reuse = getattr(integrand, "reuse", None)
    if reuse is not None and reuse.kind == "soft" and reuse.r_edge > 0:
        return [lam * math.pi * reuse.r_edge**2]
    return None


def _check_plane_divergence(integrand: LoadIntegrand, prop: PropagationModel, marks: MarkModel):
    if integrand.tag != "affine" or marks.mean == 0:
        return
    if prop.is_power_law and prop.r_min == 0:
        if prop.eta <= 2:
            raise Diverges("eta <= 2: the mean interference is infinite")
        r1, r2 = 1e-7, 2e-7
        v1, v2 = float(integrand.f1(np.asarray(r1))), float(integrand.f1(np.asarray(r2)))
        if v1 > 0 and v2 > 0:
            a = math.log(v2 / v1) / math.log(2.0)
            # r f1(r) H(r) ~ r^{1 + a + 2 - eta}
            if 3 + a - prop.eta <= -1:
                raise Diverges(f"f1 ~ r^{a:.3g} makes the mean load infinite")


def plane_mean_load(
    integrand: LoadIntegrand,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    strategy=None,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """First Palm moment ``2 pi int r K(r) exp(-lam pi r^2) dr``.

    Computed as ``(1/lam) int_0^inf K(sqrt(u / (lam pi))) e^{-u} du``.
    """
    if not lam > 0:
        raise DomainError("lambda must be positive")
    kind = _strategy_kind(strategy, integrand)
    _check_plane_divergence(integrand, prop, marks)
    if integrand.constant is not None:
        return integrand.constant / lam
    if kind == "transform_inversion":
        spec = QuadratureSpec(max(spec.abs_tol, 1e-7), max(spec.rel_tol, 1e-7), spec.max_subdivisions)

    def g(u):
        if u <= 0:
            return 0.0
        r = math.sqrt(u / (lam * math.pi))
        return conditional_expectation(r, integrand, lam, prop, marks, kind) * math.exp(-u)

    try:
        val = integrate(g, 0.0, math.inf, spec, points=_u_breakpoints(integrand, lam))[0]
    except NonConvergent as exc:
        raise Diverges(str(exc)) from exc
    return val / lam


def plane_mean_load_affine(
    f0,
    f1,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    spec: QuadratureSpec = DEFAULT_SPEC,
    closed_form: bool = True,
) -> float:
    """``2 pi int r (f0 + 2 pi lam E[G] H(r) f1) exp(-lam pi r^2) dr``,
    ``H(r) = int_r^inf u h(u) du``."""
    integ = LoadIntegrand.affine(f0, f1 if f1 is not None else (lambda r: np.zeros(np.shape(r))))
    _check_plane_divergence(integ, prop, marks)
    g_mean = marks.mean
    inner = spec.tightened(100.0)

    def H(r):
        if closed_form and prop.closed_form_from(r):
            return prop.H_plane(r)
        # powers are tiny in mW, so only the relative tolerance is meaningful
        return integrate(lambda u: u * float(prop.h(u)), r, math.inf, QuadratureSpec(
            1e-300, inner.rel_tol, 500, "algebraic", 1.0 / r))[0]

    def g(u):
        if u <= 0:
            return 0.0
        r = math.sqrt(u / (lam * math.pi))
        val = float(f0(np.asarray(r)))
        if f1 is not None and g_mean != 0:
            val += 2 * math.pi * lam * g_mean * H(r) * float(f1(np.asarray(r)))
        return val * math.exp(-u)

    try:
        return integrate(g, 0.0, math.inf, spec)[0] / lam
    except NonConvergent as exc:
        raise Diverges(str(exc)) from exc


# ---------------------------------------------------------------------------
# second moment


@dataclass
class _PairGrid:
    u: np.ndarray  # 1/t
    wu: np.ndarray
    theta: np.ndarray
    wtheta: np.ndarray
    B: np.ndarray  # (n_u, n_theta)


def _pair_grid(n_u: int, n_theta: int) -> _PairGrid:
    u, wu = _gl01(n_u)
    s, ws = _gl01(n_theta)
    # smoothstep clusters nodes at theta = 0 and theta = pi
    theta = math.pi * (3 * s**2 - 2 * s**3)
    wtheta = math.pi * 6 * s * (1 - s) * ws
    t = 1.0 / u
    B = np.array([[covered_area_pair(1.0, ti * np.exp(1j * th)) for th in theta] for ti in t])
    return _PairGrid(u, wu, theta, wtheta, B)


def _normalised_fields(grid: _PairGrid, eta: float, n_ext: int):
    """Scale-free conditional means, variances and covariance on the grid."""
    shape = grid.B.shape
    m1, m2, v1, v2, c = (np.empty(shape) for _ in range(5))
    for i, ui in enumerate(grid.u):
        for j, th in enumerate(grid.theta):
            w = np.exp(1j * th) / ui
            x, wx = exterior_nodes([1.0, w], eta, n_ext, n_ext, n_ext)
            d1, d2 = np.abs(1.0 - x), np.abs(w - x)
            k1, k2 = d1 ** (-eta), d2 ** (-eta)
            m1[i, j], m2[i, j] = wx @ k1, wx @ k2
            x, wx = exterior_nodes([1.0, w], 2 * eta, n_ext, n_ext, n_ext)
            k1, k2 = np.abs(1.0 - x) ** (-eta), np.abs(w - x) ** (-eta)
            v1[i, j], v2[i, j], c[i, j] = wx @ (k1 * k1), wx @ (k2 * k2), wx @ (k1 * k2)
    return m1, m2, v1, v2, c


def _pair_moments_general(r, rp, th, lam, prop, marks, n_ext):
    """Conditional means and covariance at ``(r, rp e^{i th})`` for any gain."""
    z1, z2 = complex(r), rp * np.exp(1j * th)
    x, wx = exterior_nodes([z1, z2], prop.decay, n_ext, n_ext, n_ext)
    h1, h2 = prop.h(np.abs(z1 - x)), prop.h(np.abs(z2 - x))
    m1, m2 = lam * marks.mean * (wx @ h1), lam * marks.mean * (wx @ h2)
    x, wx = exterior_nodes([z1, z2], 2 * prop.decay, n_ext, n_ext, n_ext)
    h1, h2 = prop.h(np.abs(z1 - x)), prop.h(np.abs(z2 - x))
    g2 = lam * marks.second_moment
    return m1, m2, g2 * (wx @ (h1 * h1)), g2 * (wx @ (h2 * h2)), g2 * (wx @ (h1 * h2))


def _pair_expectation(kind, integrand, r1, r2, m1, m2, v1, v2, c, n_gh=16):
    """``L = E[f(r1, I1) f(r2, I2)]`` for arrays of node values."""
    if integrand.tag == "no_interference":
        return integrand.f0(r1) * integrand.f0(r2)
    if kind == "affine_exact" or (kind == "gaussian_approx" and integrand.tag == "affine"):
        a0, a1 = integrand.f0(r1), integrand.f1(r1)
        b0, b1 = integrand.f0(r2), integrand.f1(r2)
        return a0 * b0 + a0 * b1 * m2 + a1 * b0 * m1 + a1 * b1 * (c + m1 * m2)
    if kind == "mean_field":
        return integrand.f(r1, m1) * integrand.f(r2, m2)
    if kind == "gaussian_approx":
        x, w = _gh(n_gh)
        s1 = np.sqrt(np.maximum(v1, 0.0))
        s2 = np.sqrt(np.maximum(v2, 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            rho = np.clip(np.nan_to_num(c / (s1 * s2)), -1.0, 1.0)
        out = np.zeros(np.broadcast(r1, m1).shape)
        for xa, wa in zip(x, w):
            i1 = np.maximum(m1 + s1 * xa, 0.0)
            fa = integrand.f(r1, i1)
            inner = np.zeros_like(out)
            for xb, wb in zip(x, w):
                i2 = np.maximum(m2 + s2 * (rho * xa + np.sqrt(1 - rho**2) * xb), 0.0)
                inner += wb * integrand.f(r2, i2)
            out += wa * fa * inner
        return out
    raise StrategyMismatch(f"second moment is not available under {kind}")


def plane_second_moment(
    integrand: LoadIntegrand,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    strategy=None,
    n_u: int = 32,
    n_theta: int = 48,
    n_v: int = 40,
    n_ext: int = 32,
) -> float:
    """Second Palm moment of the load by tensor-product quadrature."""
    kind = _strategy_kind(strategy, integrand)
    _check_plane_divergence(integrand, prop, marks)
    grid = _pair_grid(n_u, n_theta)
    t = 1.0 / grid.u
    v, wv = special.roots_genlaguerre(n_v, 1.0)
    # outer weight: 8 pi t dt dtheta / (2 lam^2 B^2), t dt = du / u^3
    outer = 8 * math.pi * (grid.wu / grid.u**3)[:, None] * grid.wtheta[None, :] / (2 * lam**2 * grid.B**2)
    # radial nodes r = sqrt(v / (lam B)), r' = t r
    r = np.sqrt(v[None, None, :] / (lam * grid.B[:, :, None]))
    rp = t[:, None, None] * r
    if integrand.tag == "no_interference" or marks.mean == 0 and marks.second_moment == 0:
        L = _pair_expectation(kind, interference_free(integrand), r, rp, 0, 0, 0, 0, 0)
    elif prop.is_power_law and prop.r_min == 0:
        m1n, m2n, v1n, v2n, cn = _normalised_fields(grid, prop.eta, n_ext)
        eta = prop.eta
        g1 = lam * marks.mean * prop.scale * r ** (2 - eta)
        g2 = lam * marks.second_moment * prop.scale**2 * r ** (2 - 2 * eta)
        L = _pair_expectation(
            kind,
            integrand,
            r,
            rp,
            g1 * m1n[..., None],
            g1 * m2n[..., None],
            g2 * v1n[..., None],
            g2 * v2n[..., None],
            g2 * cn[..., None],
        )
    else:
        fields = np.empty((5,) + r.shape)
        for idx in np.ndindex(r.shape):
            i, j, _ = idx
            fields[(slice(None),) + idx] = _pair_moments_general(
                r[idx], rp[idx], grid.theta[j], lam, prop, marks, max(n_ext // 2, 16)
            )
        L = _pair_expectation(kind, integrand, r, rp, *fields)
    return float(np.sum(outer * (L @ wv)))


def interference_free(integrand: LoadIntegrand) -> LoadIntegrand:
    """The density with the interference set to zero."""
    if integrand.tag == "no_interference":
        return integrand
    return LoadIntegrand.from_f0(lambda r: integrand.f(r, np.zeros_like(np.asarray(r, dtype=float))))


# ---------------------------------------------------------------------------
# higher moments


@dataclass
class MomentEstimate:
    value: float
    stderr: float


def plane_moment_general(
    N: int,
    integrand: LoadIntegrand,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    mc_budget: int = 10_000,
    strategy=None,
    seed: int = 0,
    batch: int = 4096,
) -> MomentEstimate:
    """N-th Palm moment ``int E[prod f(z_i, I(z_i)) | z] exp(-lam B_N) dz``.

    N = 1, 2 use quadrature (stderr 0). For N >= 3 the points are drawn
    i.i.d. with density ``lam' exp(-lam' pi |z|^2)``, ``lam' = lam / N``;
    since ``B_N >= pi max |z_i|^2`` the importance weights are bounded.
    Interference enters through the joint Gaussian law of ``I(z_i)``.
    """
    if N < 1 or int(N) != N:
        raise DomainError("N must be a positive integer")
    if N > 4:
        raise BudgetExceeded("moments beyond N = 4 are not supported")
    if N == 1:
        return MomentEstimate(plane_mean_load(integrand, lam, prop, marks, strategy), 0.0)
    if N == 2:
        return MomentEstimate(plane_second_moment(integrand, lam, prop, marks, strategy), 0.0)
    if mc_budget < 10_000:
        raise DomainError("mc_budget must be at least 1e4")
    kind = _strategy_kind(strategy, integrand)
    rng = np.random.default_rng(seed)
    lam_q = lam / N
    vals = []
    done = 0
    while done < mc_budget:
        n = min(batch, mc_budget - done)
        rad = np.sqrt(rng.exponential(1.0 / (lam_q * math.pi), size=(n, N)))
        z = rad * np.exp(2j * math.pi * rng.random((n, N)))
        B = covered_area_batch(z)
        logw = -lam * B + lam_q * math.pi * np.sum(rad**2, axis=1) - N * math.log(lam_q)
        prod = _product_expectation(kind, integrand, z, lam, prop, marks, rng)
        vals.append(np.exp(logw) * prod)
        done += n
    vals = np.concatenate(vals)
    return MomentEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)))


def _product_expectation(kind, integrand, z, lam, prop, marks, rng):
    r = np.abs(z)
    if integrand.tag == "no_interference" or (marks.mean == 0 and marks.second_moment == 0):
        f = interference_free(integrand)
        return np.prod(f.f0(r), axis=1)
    out = np.empty(z.shape[0])
    for k in range(z.shape[0]):
        mean, cov = gaussian_limit_params(z[k], lam, prop, marks, ExclusionRegion.ball_union(z[k]))
        if kind == "mean_field":
            out[k] = np.prod(integrand.f(r[k], mean))
            continue
        x = rng.multivariate_normal(mean, cov, method="eigh")
        if integrand.tag != "affine":
            x = np.maximum(x, 0.0)
        out[k] = np.prod(integrand.f(r[k], x))
    return out


# ---------------------------------------------------------------------------
# elastic traffic bound


def _bound_prefactor(lam, lam_us, sigma, w, eta):
    if not eta > 2:
        raise DomainError("the bound is infinite for eta <= 2")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return LN2 * lam_us * sigma / (w * lam)


def elastic_interference_limited(lam: float, lam_us: float, sigma: float, w: float, eta: float) -> float:
    """``(ln2 lam_us sigma / (w lam)) * 2 / (eta - 2)``."""
    return _bound_prefactor(lam, lam_us, sigma, w, eta) * 2.0 / (eta - 2.0)


def elastic_low_sinr_bound(lam: float, lam_us: float, sigma: float, w: float, prop: PropagationModel) -> float:
    """Lower bound on the mean elastic load under the Shannon rate.

    ``(ln2 lam_us sigma / (w lam)) (N Gamma(1 + eta/2) / (S (sqrt(pi lam))^eta) + 2/(eta - 2))``
    with ``N`` the noise power and ``S`` the received power at unit distance.
    It is exact for the linear rate model.
    """
    if not prop.is_power_law:
        raise DomainError("the bound needs a power-law gain")
    eta = prop.eta
    pre = _bound_prefactor(lam, lam_us, sigma, w, eta)
    noise_term = prop.noise * special.gamma(1 + eta / 2) / (prop.scale * math.sqrt(math.pi * lam) ** eta)
    return pre * (noise_term + 2.0 / (eta - 2.0))
