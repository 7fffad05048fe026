"""
Quadrature, special functions and transform inversion.

Everything here is a pure function of its arguments. Adaptive quadrature is
QUADPACK (Gauss-Kronrod) through :func:`scipy.integrate.quad`; semi-infinite
ranges are first mapped onto ``(0, 1]`` so that the same finite-interval rule
is used everywhere.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as _integrate
from scipy import special

from .errors import DomainError, NonConvergent, NotACharacteristicFunction

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and mapping used by :func:`integrate`.

    ``scale`` is the length scale of the change of variables for semi-infinite
    intervals: ``r = a - ln(u) / scale`` (exponential) or
    ``r = a + u / (scale * (1 - u))`` (algebraic).
    """

    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_subdivisions: int = 200
    semi_infinite_map: str = "exponential"
    scale: float = 1.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be >= 1")
        if self.semi_infinite_map not in ("exponential", "algebraic"):
            raise DomainError(f"unknown map {self.semi_infinite_map!r}")
        if not self.scale > 0:
            raise DomainError("scale must be positive")

    def tightened(self, factor: float = 100.0) -> "QuadratureSpec":
        """Spec for inner loops of nested integrals."""
        return QuadratureSpec(
            self.abs_tol / factor,
            self.rel_tol / factor,
            self.max_subdivisions,
            self.semi_infinite_map,
            self.scale,
        )


DEFAULT_SPEC = QuadratureSpec()


def _mapped(f, a, spec):
    c = spec.scale
    if spec.semi_infinite_map == "exponential":

        def g(u):
            if u <= 0.0:
                return 0.0
            return f(a - math.log(u) / c) / (c * u)

    else:

        def g(u):
            if u >= 1.0:
                return 0.0
            v = 1.0 - u
            return f(a + u / (c * v)) / (c * v * v)

    return g


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float = math.inf,
    spec: QuadratureSpec = DEFAULT_SPEC,
    points: Optional[Sequence[float]] = None,
) -> tuple[float, float]:
    """Integrate a real function over ``[a, b]``; ``b`` may be ``+inf``.

    Returns ``(value, error_estimate)``. Raises :class:`NonConvergent` when
    the subdivision budget is exhausted above tolerance, which usually means
    the integrand is not integrable.
    """
    if b < a:
        v, e = integrate(f, b, a, spec, points)
        return -v, e
    if a == b:
        return 0.0, 0.0
    if math.isinf(b):
        g = _mapped(f, a, spec)
        lo, hi = 0.0, 1.0
        pts = None
        if points:
            c = spec.scale
            if spec.semi_infinite_map == "exponential":
                pts = sorted(math.exp(-c * (p - a)) for p in points if p > a)
            else:
                pts = sorted(c * (p - a) / (1 + c * (p - a)) for p in points if p > a)
    else:
        g, lo, hi = f, a, b
        pts = [p for p in points if a < p < b] if points else None
    with np.errstate(all="ignore"):
        res = _integrate.quad(
            g,
            lo,
            hi,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=spec.max_subdivisions,
            points=pts or None,
            full_output=1,
        )
    value, err = res[0], res[1]
    tol = max(spec.abs_tol, spec.rel_tol * abs(value))
    if not np.isfinite(value) or (len(res) > 3 and err > 10 * tol):
        raise NonConvergent(
            f"quadrature on [{a}, {b}] stopped at error {err:.3g} (tolerance {tol:.3g})"
        )
    return value, err


def integrate_complex(f, a, b=math.inf, spec=DEFAULT_SPEC, points=None) -> tuple[complex, float]:
    re, e1 = integrate(lambda x: f(x).real, a, b, spec, points)
    im, e2 = integrate(lambda x: f(x).imag, a, b, spec, points)
    return complex(re, im), math.hypot(e1, e2)


@lru_cache(maxsize=256)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# ---------------------------------------------------------------------------
# special functions


def lower_incomplete_gamma(x: float, s: float) -> float:
    """Lower incomplete gamma ``int_0^x t^(s-1) e^(-t) dt``.

    For ``s <= 0`` (non-integer) the value is the analytic continuation
    obtained from ``gamma(x, s) = (gamma(x, s + 1) + x^s e^(-x)) / s``.
    """
    if x < 0 or math.isnan(x):
        raise DomainError("x must be >= 0")
    if s > 0:
        if math.isinf(x):
            return math.gamma(s)
        return float(special.gammainc(s, x) * special.gamma(s))
    if s == math.floor(s):
        raise DomainError(f"no continuation at non-positive integer s={s}")
    if x == 0:
        raise DomainError(f"gamma(0, {s}) diverges")
    tail = 0.0 if math.isinf(x) else x**s * math.exp(-x)
    return (lower_incomplete_gamma(x, s + 1.0) + tail) / s


def lower_gamma_complex(b: float, c) -> np.ndarray:
    """Lower incomplete gamma ``gamma(b, c)`` for real ``b > 0`` and complex
    ``c`` with non-negative real part (principal branch), vectorised.

    Power series for ``|c| < 12``, Legendre continued fraction for the upper
    function otherwise.
    """
    c = np.asarray(c, dtype=complex)
    out = np.empty_like(c)
    small = np.abs(c) < 12.0
    if small.any():
        cs = c[small]
        term = np.ones_like(cs) / b
        acc = term.copy()
        for n in range(1, 200):
            term = term * cs / (b + n)
            acc += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(acc)):
                break
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.exp(-cs + b * np.log(cs)) * acc
        out[small] = np.where(cs == 0, 0.0, val)
    big = ~small
    if big.any():
        cb = c[big]
        out[big] = math.gamma(b) - _upper_gamma_cf(b, cb)
    return out


def _upper_gamma_cf(b, c):
    # modified Lentz on the Legendre fraction for Gamma(b, c)
    tiny = 1e-300
    bb = c + 1.0 - b
    cc = np.full_like(c, 1.0 / tiny)
    d = 1.0 / bb
    h = d.copy()
    for i in range(1, 2000):
        an = -i * (i - b)
        bb = bb + 2.0
        d = an * d + bb
        d = np.where(np.abs(d) < tiny, tiny, d)
        cc = bb + an / cc
        cc = np.where(np.abs(cc) < tiny, tiny, cc)
        d = 1.0 / d
        delta = d * cc
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 1e-15):
            break
    else:
        raise NonConvergent("incomplete gamma continued fraction")
    return np.exp(-c + b * np.log(c)) * h


def exp_integral_e1(x):
    """Exponential integral ``E1(x) = int_1^inf e^(-x t) / t dt`` for x > 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("E1 is defined here for x > 0 only")
    out = special.exp1(arr)
    return float(out) if np.ndim(x) == 0 else out


def exp_scaled_e1(x):
    """``e^x E1(x)`` without overflow, for x > 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    lo = x < 1.0
    out[lo] = np.exp(x[lo]) * special.exp1(x[lo])
    if (~lo).any():
        xb = x[~lo]
        # continued fraction 1/(x+1-1/(x+3-4/(x+5-...))) evaluated bottom-up
        acc = np.zeros_like(xb)
        for k in range(60, 0, -1):
            acc = k * k / (xb + 2 * k + 1 - acc)
        out[~lo] = 1.0 / (xb + 1.0 - acc)
    return out


# ---------------------------------------------------------------------------
# expectations from characteristic functions
#
# Fourier convention: g_hat(s) = int g(x) e^{-isx} dx and
#   E[g(I)] = (1 / 2 pi) int conj(g_hat(s)) E[e^{-isI}] ds.


@dataclass(frozen=True)
class Polynomial:
    """``g(x) = sum_k coeffs[k] x^k``."""

    coeffs: tuple


@dataclass(frozen=True)
class Exponential:
    """``g(x) = coef * exp(-rate * x)``."""

    rate: float
    coef: float = 1.0


@dataclass(frozen=True)
class Indicator:
    """``g(x) = 1`` on ``(lo, hi]``."""

    lo: float = -math.inf
    hi: float = math.inf


@dataclass(frozen=True)
class SquareIntegrable:
    """g with a known Fourier transform ``g_hat`` (same convention as above)."""

    g_hat: Callable


@dataclass(frozen=True)
class Smooth:
    """Differentiable g of a non-negative variable; ``dg`` is its derivative.

    ``location`` and ``spread`` optionally give the mean and standard
    deviation of the variable so the inversion grid can be placed.
    """

    g: Callable
    dg: Callable
    location: Optional[float] = None
    spread: Optional[float] = None


def _derivatives_at_zero(char_fn, kmax, radius):
    # Cauchy integral on a circle, trapezoid rule: spectrally accurate.
    m = 64
    th = 2 * np.pi * np.arange(m) / m
    pts = radius * np.exp(1j * th)
    vals = np.array([char_fn(p) for p in pts])
    out = []
    for k in range(kmax + 1):
        ck = np.mean(vals * np.exp(-1j * k * th)) / radius**k
        out.append(ck * math.factorial(k))
    return out


def moments_from_char_fn(char_fn, kmax: int, radius: float | None = None) -> list[float]:
    """Raw moments ``E[I^k]``, k <= kmax, from derivatives of the char. function.

    Requires char_fn to be analytic on a disc around 0 of the chosen radius.
    """
    if radius is None:
        d1 = _derivatives_at_zero(char_fn, 2, 1e-3)
        m1 = (1j * d1[1]).real
        m2 = (-d1[2]).real
        scale = math.sqrt(max(m2, 0.0)) + abs(m1)
        radius = 0.5 / scale if scale > 0 else 0.5
    ders = _derivatives_at_zero(char_fn, kmax, radius)
    # char_fn^(k)(0) = (-i)^k E[I^k]
    return [((1j) ** k * ders[k]).real for k in range(kmax + 1)]


def _gil_pelaez_cdf(char_fn, x, spec):
    # phi(u) = E[e^{iuI}] = char_fn(-u)
    def integrand(u):
        if u == 0.0:
            u = 1e-300
        return (np.exp(-1j * u * x) * char_fn(-u)).imag / u

    val, _ = integrate(integrand, 0.0, math.inf, QuadratureSpec(
        spec.abs_tol, spec.rel_tol, max(spec.max_subdivisions, 2000), "algebraic", 1.0))
    return 0.5 - val / math.pi


_EULER_A, _EULER_N, _EULER_M = 18.4, 15, 11
_EULER_BINOM = np.array([math.comb(_EULER_M, k) for k in range(_EULER_M + 1)]) / 2.0**_EULER_M


def survival_from_laplace(laplace: Callable, t) -> np.ndarray:
    """``P(I > t)`` for a non-negative variable from its Laplace transform.

    Euler-summed Fourier series inversion (Abate and Whitt) of
    ``(1 - L(p)) / p``; ``laplace`` must accept complex arrays.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    kmax = _EULER_N + _EULER_M
    k = np.arange(kmax + 1)
    p = (_EULER_A + 2j * np.pi * k[None, :]) / (2.0 * t[:, None])
    fhat = (1.0 - laplace(p)) / p
    terms = fhat.real * np.where(k % 2 == 0, 1.0, -1.0)[None, :]
    terms[:, 0] *= 0.5
    partial = np.cumsum(terms, axis=1)[:, _EULER_N:]
    s = partial @ _EULER_BINOM
    return np.clip(math.exp(_EULER_A / 2) * s / t, 0.0, 1.0)


def _expect_smooth(char_fn, g: Smooth, spec):
    laplace = lambda p: char_fn(-1j * np.asarray(p))  # noqa: E731
    if g.location is None or g.spread is None:
        m1, m2 = moments_from_char_fn(char_fn, 2)[1:3]
        loc, sd = m1, math.sqrt(max(m2 - m1 * m1, 0.0))
    else:
        loc, sd = g.location, g.spread
    sd = max(sd, 1e-12 * max(abs(loc), 1.0))
    a = max(0.0, loc - 8.0 * sd)
    edges = [a, max(a, loc), loc + 3.0 * sd, loc + 8.0 * sd, loc + 30.0 * sd]
    total = float(g.g(a))
    n = 32
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        t, w = gauss_legendre(n, lo, hi)
        total += float(np.sum(w * np.asarray(g.dg(t)) * survival_from_laplace(laplace, t)))
    if a > 0:
        t, w = gauss_legendre(n, 0.0, a)
        total -= float(np.sum(w * np.asarray(g.dg(t)) * (1.0 - survival_from_laplace(laplace, t))))
    return total


def expectation_via_transform(char_fn: Callable, g, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """``E[g(I)]`` given ``char_fn(s) = E[exp(-i s I)]``.

    ``g`` is one of :class:`Polynomial`, :class:`Exponential`,
    :class:`Indicator`, :class:`SquareIntegrable` or :class:`Smooth`; each
    kind has a closed-form (possibly distributional) Fourier transform, which
    is what makes the inversion well defined. Arbitrary callables are
    rejected.
    """
    c0 = complex(char_fn(0.0))
    if abs(c0 - 1.0) > 1e-8:
        raise NotACharacteristicFunction(f"char_fn(0) = {c0}")
    if isinstance(g, Polynomial):
        mom = moments_from_char_fn(char_fn, len(g.coeffs) - 1)
        return float(sum(c * m for c, m in zip(g.coeffs, mom)))
    if isinstance(g, Exponential):
        return g.coef * complex(char_fn(-1j * g.rate)).real
    if isinstance(g, Indicator):
        hi = 1.0 if math.isinf(g.hi) else _gil_pelaez_cdf(char_fn, g.hi, spec)
        lo = 0.0 if math.isinf(g.lo) else _gil_pelaez_cdf(char_fn, g.lo, spec)
        return hi - lo
    if isinstance(g, SquareIntegrable):
        def integrand(s):
            return (np.conj(g.g_hat(s)) * char_fn(s) + np.conj(g.g_hat(-s)) * char_fn(-s)).real

        val, _ = integrate(integrand, 0.0, math.inf, QuadratureSpec(
            spec.abs_tol, spec.rel_tol, spec.max_subdivisions, "algebraic", 1.0))
        return val / (2 * math.pi)
    if isinstance(g, Smooth):
        return _expect_smooth(char_fn, g, spec)
    raise TypeError(
        "g must be Polynomial, Exponential, Indicator, SquareIntegrable or Smooth"
    )
