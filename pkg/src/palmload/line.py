"""
Load of the typical cell for base stations on the real line.

With neighbours at ``-x_l`` and ``x_r`` (i.i.d. Exp(lam)) the cell is
``[-x_l/2, x_r/2]``. For an affine integrand the load is

    F0(x_l/2) + F0(x_r/2) + sum_n G_n K(x_n),
    K(u) = int_{-x_l/2}^{x_r/2} f1(|z|) h(|z - u|) dz,

and the interferers other than the two neighbours form a PPP outside
``[-x_l, x_r]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import special, stats

from .errors import DomainError, Diverges, NonConvergent
from .numerics import DEFAULT_SPEC, QuadratureSpec, integrate, integrate_complex
from .shotnoise import MarkModel, PropagationModel
from .traffic import LoadIntegrand


@lru_cache(maxsize=None)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@lru_cache(maxsize=None)
def _laguerre(n, alpha):
    return special.roots_genlaguerre(n, alpha)


def _as_f0(f0) -> Callable:
    if isinstance(f0, LoadIntegrand):
        if f0.tag == "general":
            raise DomainError("integrand has no interference-free part")
        return f0.f0
    if np.isscalar(f0):
        c = float(f0)
        return lambda r: np.full(np.shape(r), c)
    return f0


def _F0_nodes(f0: Callable, x, n: int = 48):
    """``int_0^x f0`` by fixed Gauss-Legendre nodes (vectorised in ``x``)."""
    x = np.asarray(x, dtype=float)
    t, w = _gl(n)
    pts = x[..., None] * t
    return x * (f0(pts) @ w)


def _F0_adaptive(f0: Callable, x: float, spec: QuadratureSpec) -> float:
    return integrate(lambda r: float(f0(np.asarray(r))), 0.0, x, spec)[0] if x > 0 else 0.0


def line_laplace_no_interf(s: complex, f0, lam: float, spec: QuadratureSpec = DEFAULT_SPEC) -> complex:
    """``(lam int_0^inf exp(-s F0(r/2) - lam r) dr)^2``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    s = complex(s)
    if s.real < 0:
        raise DomainError("Re(s) must be >= 0")
    if s == 0:
        return 1.0 + 0j
    f = _as_f0(f0)
    inner = spec.tightened(100.0)
    ext = QuadratureSpec(spec.abs_tol, spec.rel_tol, spec.max_subdivisions, "exponential", lam)
    val = integrate_complex(lambda r: np.exp(-s * _F0_adaptive(f, r / 2, inner) - lam * r), 0.0, math.inf, ext)[0]
    return complex((lam * val) ** 2)


@dataclass
class LineClosedForm:
    """Law of the load when ``f0`` is a constant or a power ``r^alpha``.

    The load is ``scale * (Y_1 + Y_2)`` with ``Y_i = (X_i/2)^{a+1}/(a+1)``
    and ``X_i`` i.i.d. Exp(lam), so ``X_i/2`` is Exp(2 lam).
    """

    alpha: float
    lam: float
    scale: float = 1.0

    def _moment_one(self, k: int) -> float:
        a1 = self.alpha + 1
        return special.gamma(k * a1 + 1) / ((2 * self.lam) ** (k * a1) * a1**k)

    @property
    def mean(self) -> float:
        return 2 * self.scale * self._moment_one(1)

    @property
    def variance(self) -> float:
        return 2 * self.scale**2 * (self._moment_one(2) - self._moment_one(1) ** 2)

    def _cdf_one(self, y):
        a1 = self.alpha + 1
        y = np.maximum(np.asarray(y, dtype=float), 0.0)
        return -np.expm1(-2 * self.lam * (a1 * y) ** (1.0 / a1))

    def cdf(self, t):
        """``P(load <= t)``."""
        t = np.asarray(t, dtype=float)
        if self.alpha == 0:
            return stats.gamma.cdf(t / self.scale, a=2, scale=1.0 / (2 * self.lam))
        a1 = self.alpha + 1

        def one(tt):
            if tt <= 0:
                return 0.0
            u = tt / self.scale
            # condition on X_1/2 = e ~ Exp(2 lam): Y_1 = e^{a1}/a1 <= u
            emax = (a1 * u) ** (1.0 / a1)
            g = lambda e: 2 * self.lam * math.exp(-2 * self.lam * e) * float(self._cdf_one(u - e**a1 / a1))
            return integrate(g, 0.0, emax, DEFAULT_SPEC)[0]

        return np.vectorize(one)(t)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        a1 = self.alpha + 1
        e = rng.exponential(1.0 / (2 * self.lam), size=(n, 2))
        return self.scale * (e**a1 / a1).sum(axis=1)


def line_closed_form_case(f0_kind: str, lam: float, alpha: float = 0.0, scale: float = 1.0) -> LineClosedForm:
    """``constant`` (``f0 = scale``) or ``power`` (``f0 = scale r^alpha``)."""
    if f0_kind == "constant":
        return LineClosedForm(0.0, lam, scale)
    if f0_kind == "power":
        if alpha < 0:
            raise DomainError("alpha must be >= 0")
        return LineClosedForm(float(alpha), lam, scale)
    raise DomainError(f"unknown kind {f0_kind!r}")


# ---------------------------------------------------------------------------
# affine integrands


def _power_at_zero(f1: Callable) -> float:
    """Exponent ``a`` in ``f1(r) ~ r^a`` as ``r -> 0`` (inf if f1 vanishes)."""
    r1, r2 = 1e-7, 2e-7
    v1, v2 = float(f1(np.asarray(r1))), float(f1(np.asarray(r2)))
    if v1 <= 0 or v2 <= 0:
        return math.inf
    return math.log(v2 / v1) / math.log(2.0)


def _check_line_divergence(f1: Callable, prop: PropagationModel, marks: MarkModel):
    if f1 is None or marks.mean == 0:
        return
    if prop.is_power_law and prop.r_min == 0:
        if prop.eta <= 1:
            raise Diverges("eta <= 1: interference is infinite on the line")
        a = _power_at_zero(f1)
        if a + 1 - prop.eta <= -1:
            raise Diverges(
                f"f1 ~ r^{a:.3g} near the base station is not integrable against H(r) ~ r^(1-{prop.eta})"
            )


def _affine_parts(f0, f1):
    if isinstance(f0, LoadIntegrand):
        integ = f0
        if integ.tag == "no_interference":
            return integ.f0, None
        if integ.tag != "affine":
            raise DomainError("line transforms need an affine or interference-free integrand")
        return integ.f0, integ.f1
    return _as_f0(f0), (None if f1 is None else _as_f0(f1))


def line_laplace_affine(
    s: complex,
    f0,
    f1,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    n_r: int = 128,
    n_v: int = 40,
    n_k: int = 40,
    n_ext: int = 64,
) -> complex:
    """Laplace transform of the load for an affine integrand.

    Symmetry reduces the pair ``(x_l, x_r)`` to ``r1 = v r2 <= r2`` with
    weight ``2 lam^2``. All integrals use fixed node sets, so the result is
    a smooth function of ``s`` and finite differences in ``s`` are
    consistent with the mean.
    """
    s = complex(s)
    if s.real < 0:
        raise DomainError("Re(s) must be >= 0")
    if s == 0:
        return 1.0 + 0j
    f0, f1 = _affine_parts(f0, f1)
    _check_line_divergence(f1, prop, marks)
    v, wv = _gl(n_v)
    y, wy = _laguerre(n_r, 1.0)
    # r2 = y / (lam (1 + v)), r1 = v r2; dr1 dr2 = r2 dv dr2
    r2 = y[None, :] / (lam * (1 + v[:, None]))
    r1 = v[:, None] * r2
    weight = 2 * lam**2 * (wv[:, None] / (lam * (1 + v[:, None])) ** 2) * wy[None, :]
    logq = -s * (_F0_nodes(f0, r1 / 2) + _F0_nodes(f0, r2 / 2))
    if f1 is not None and marks.mean != 0:
        logq = logq + _log_interference_factor(s, r1, r2, f1, lam, prop, marks, n_k, n_ext)
    return complex(np.sum(weight * np.exp(logq)))


def _kernel(u, a, b, f1, prop, n_k):
    """``K(u) = int_{-a}^{b} f1(|z|) h(|z - u|) dz`` (broadcast over u, a, b)."""
    return _kernel_many(u[..., None], a, b, f1, prop, n_k)[..., 0]


def _log_interference_factor(s, r1, r2, f1, lam, prop, marks, n_k, n_ext):
    a, b = r1 / 2, r2 / 2
    # neighbours at -r1 and r2
    k_left = _kernel(-r1, a, b, f1, prop, n_k)
    k_right = _kernel(r2, a, b, f1, prop, n_k)
    with np.errstate(divide="ignore"):
        out = np.log(marks.laplace(s * k_left)) + np.log(marks.laplace(s * k_right))
    # PPP on (-inf, -r1) and (r2, inf): u = edge +- L y / (1 - y)
    t, w = _gl(n_ext)
    L = np.maximum(r2, 1e-12)[..., None]
    d = L * t / (1 - t)
    jac = L / (1 - t) ** 2
    ul = -r1[..., None] - d
    ur = r2[..., None] + d
    kl = _kernel_many(ul, a, b, f1, prop, n_k)
    kr = _kernel_many(ur, a, b, f1, prop, n_k)
    ext = (marks.one_minus_laplace(s * kl) + marks.one_minus_laplace(s * kr)) * jac
    return out - lam * (ext @ w)


def _kernel_many(u, a, b, f1, prop, n_k):
    """``K`` at several points per cell: ``u`` has one extra trailing axis."""
    t, w = _gl(n_k)
    zl = -a[..., None] * t
    zr = b[..., None] * t
    fl = f1(a[..., None] * t)
    fr = f1(zr)
    hl = prop.h(np.abs(zl[..., None, :] - u[..., :, None]))
    hr = prop.h(np.abs(zr[..., None, :] - u[..., :, None]))
    return a[..., None] * ((hl * fl[..., None, :]) @ w) + b[..., None] * ((hr * fr[..., None, :]) @ w)


def line_mean_load(
    f0,
    f1,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> float:
    """``2 int_0^inf (f0(r) + 2 lam E[G] H(r) f1(r)) e^{-2 lam r} dr``."""
    f0, f1 = _affine_parts(f0, f1)
    _check_line_divergence(f1, prop, marks)
    g = marks.mean
    ext = QuadratureSpec(spec.abs_tol, spec.rel_tol, spec.max_subdivisions, "exponential", 2 * lam)
    inner = spec.tightened(100.0)

    def integrand(r):
        r = float(r)
        val = float(f0(np.asarray(r)))
        if f1 is not None and g != 0 and r > 0:
            val += 2 * lam * g * prop.H_line(r, inner) * float(f1(np.asarray(r)))
        return val * math.exp(-2 * lam * r)

    try:
        return 2 * integrate(integrand, 0.0, math.inf, ext)[0]
    except NonConvergent as exc:
        raise Diverges(str(exc)) from exc


@dataclass
class LineLoadTransform:
    """``s -> E0[exp(-s load)]`` with its metadata."""

    evaluator: Callable[[complex], complex]
    tag: str
    lam: float
    integrand: object = None
    prop: Optional[PropagationModel] = None
    marks: Optional[MarkModel] = None

    def __call__(self, s):
        return self.evaluator(s)


def line_transform(integrand: LoadIntegrand, lam: float, prop=None, marks=None) -> LineLoadTransform:
    if integrand.tag == "no_interference":
        ev = lambda s: line_laplace_no_interf(s, integrand.f0, lam)
    elif integrand.tag == "affine":
        ev = lambda s: line_laplace_affine(s, integrand.f0, integrand.f1, lam, prop, marks)
    else:
        raise DomainError("the line transform needs an affine or interference-free integrand")
    return LineLoadTransform(ev, integrand.tag, lam, integrand, prop, marks)
