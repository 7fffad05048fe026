"""
Shot-noise interference ``I(z) = sum_n G_n h(|z - x_n|)`` of a marked PPP.

``PropagationModel.h`` returns received power (transmit power included), so
every interference value in this package is a linear power.

Exclusion regions
-----------------
Conditioning on ``z_1..z_N`` lying in the typical cell leaves a PPP on
``C \\ B_N`` where ``B_N`` is the union of the balls ``B(z_i, |z_i|)``.
Integrals over that set are computed in polar coordinates about the origin:
the union is star-shaped, so each direction ``phi`` contributes
``[rho_max(phi), inf)``. The finite part uses Gauss-Legendre and the tail
``[c, inf)`` uses ``rho = c / v`` with Gauss-Jacobi weights matched to the
integrand's decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, NonConvergent
from .numerics import DEFAULT_SPEC, QuadratureSpec, integrate, integrate_complex, lower_gamma_complex


@dataclass(frozen=True)
class PropagationModel:
    """Path loss, transmit power and thermal noise.

    Parameters
    ----------
    kind : {"power_law", "custom"}
    P, eta, r_min : power-law gain ``P max(r, r_min)^{-eta}``.
    gain : custom gain function of the distance (vectorised).
    tail_line, tail_plane : optional closed forms of ``int_r^inf h`` and
        ``int_r^inf u h(u) du`` for custom gains (received power units).
    tx_power : linear transmit power.
    noise_density : thermal noise per Hz.
    bandwidth : noise bandwidth in Hz; noise power is their product.
    """

    kind: str = "power_law"
    P: float = 1.0
    eta: float = 4.0
    r_min: float = 0.0
    gain: Optional[Callable] = field(default=None, compare=False)
    tail_line: Optional[Callable] = field(default=None, compare=False)
    tail_plane: Optional[Callable] = field(default=None, compare=False)
    tx_power: float = 1.0
    noise_density: float = 0.0
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind == "power_law":
            if not self.P > 0:
                raise DomainError("P must be positive")
            if self.r_min < 0:
                raise DomainError("r_min must be >= 0")
        elif self.kind == "custom":
            if self.gain is None:
                raise DomainError("custom propagation needs a gain function")
        else:
            raise DomainError(f"unknown propagation kind {self.kind!r}")

    @property
    def is_power_law(self) -> bool:
        return self.kind == "power_law"

    @property
    def noise(self) -> float:
        return self.noise_density * self.bandwidth

    @property
    def scale(self) -> float:
        """Received power at unit distance for the power law."""
        return self.tx_power * self.P

    def h(self, r):
        """Received power at distance ``r``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "power_law":
            with np.errstate(divide="ignore"):
                return self.scale * np.maximum(r, self.r_min) ** (-self.eta)
        return self.tx_power * np.asarray(self.gain(r), dtype=float)

    def closed_form_from(self, r: float) -> bool:
        """Whether power-law closed forms hold for integrals starting at ``r``."""
        return self.kind == "power_law" and r >= self.r_min and r > 0

    def H_line(self, r: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
        """``int_r^inf h(u) du``."""
        if self.closed_form_from(r):
            if self.eta <= 1:
                raise DomainError("eta must exceed 1 on the line")
            return self.scale * r ** (1 - self.eta) / (self.eta - 1)
        if self.kind == "custom" and self.tail_line is not None:
            return self.tx_power * float(self.tail_line(r))
        return integrate(lambda u: self.h(u), r, math.inf, replace(spec, abs_tol=1e-300, semi_infinite_map="algebraic", scale=1.0 / r))[0]

    def H_plane(self, r: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
        """``int_r^inf u h(u) du``."""
        if self.closed_form_from(r):
            if self.eta <= 2:
                raise DomainError("eta must exceed 2 on the plane")
            return self.scale * r ** (2 - self.eta) / (self.eta - 2)
        if self.kind == "custom" and self.tail_plane is not None:
            return self.tx_power * float(self.tail_plane(r))
        return integrate(lambda u: u * self.h(u), r, math.inf, replace(spec, abs_tol=1e-300, semi_infinite_map="algebraic", scale=1.0 / r))[0]

    def H2_plane(self, r: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
        """``int_r^inf u h(u)^2 du``."""
        if self.closed_form_from(r):
            return self.scale**2 * r ** (2 - 2 * self.eta) / (2 * self.eta - 2)
        return integrate(lambda u: u * self.h(u) ** 2, r, math.inf, replace(spec, abs_tol=1e-300, semi_infinite_map="algebraic", scale=1.0 / r))[0]

    @property
    def decay(self) -> float:
        """Power-law decay rate of ``h`` used to choose tail quadrature."""
        if self.kind == "power_law":
            return self.eta
        # log-slope of a custom gain far out; fast (e.g. exponential) decay
        # underflows or exceeds the cap and keeps the default
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            a, b = (float(np.asarray(self.gain(np.asarray(r)), dtype=float)) for r in (1e3, 2e3))
            slope = math.log(a / b) / math.log(2.0) if a > 0 and b > 0 else math.inf
        if not math.isfinite(slope) or slope > 8.0:
            return 8.0
        return max(slope, 2.05)


@dataclass(frozen=True)
class MarkModel:
    """Law of the interference marks ``G``.

    ``deterministic`` uses ``g0``; ``lognormal`` uses ``mean_dB``/``std_dB``
    (``10 log10 G`` is normal); ``two_point`` puts mass ``p1`` on ``v1`` and
    ``1 - p1`` on ``v2``.
    """

    kind: str = "deterministic"
    g0: float = 1.0
    mean_dB: float = 0.0
    std_dB: float = 0.0
    p1: float = 1.0
    v1: float = 1.0
    v2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("deterministic", "lognormal", "two_point"):
            raise DomainError(f"unknown mark kind {self.kind!r}")
        if self.kind == "deterministic" and self.g0 < 0:
            raise DomainError("marks must be nonnegative")
        if self.kind == "two_point" and not (0 <= self.p1 <= 1 and self.v1 >= 0 and self.v2 >= 0):
            raise DomainError("invalid two-point law")
        if self.kind == "lognormal" and self.std_dB < 0:
            raise DomainError("std_dB must be >= 0")

    def atoms(self):
        """Support points and probabilities; lognormal uses Gauss-Hermite nodes."""
        if self.kind == "deterministic":
            return np.array([self.g0]), np.array([1.0])
        if self.kind == "two_point":
            return np.array([self.v1, self.v2]), np.array([self.p1, 1.0 - self.p1])
        x, w = _hermite(48)
        mu, sig = self._log_params()
        return np.exp(mu + sig * math.sqrt(2.0) * x), w / math.sqrt(math.pi)

    def _log_params(self):
        k = math.log(10.0) / 10.0
        return self.mean_dB * k, self.std_dB * k

    def laplace(self, s):
        """``E[exp(-s G)]`` for real or complex ``s`` (vectorised)."""
        v, p = self.atoms()
        s = np.asarray(s)
        return np.tensordot(np.exp(-s[..., None] * v), p, axes=([-1], [0]))

    def one_minus_laplace(self, s):
        """``1 - E[exp(-s G)]`` without cancellation at small ``s``."""
        v, p = self.atoms()
        s = np.asarray(s)
        return np.tensordot(-np.expm1(-s[..., None] * v), p, axes=([-1], [0]))

    @property
    def mean(self) -> float:
        if self.kind == "lognormal":
            mu, sig = self._log_params()
            return math.exp(mu + sig * sig / 2)
        v, p = self.atoms()
        return float(np.dot(v, p))

    @property
    def second_moment(self) -> float:
        if self.kind == "lognormal":
            mu, sig = self._log_params()
            return math.exp(2 * mu + 2 * sig * sig)
        v, p = self.atoms()
        return float(np.dot(v * v, p))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "deterministic":
            return np.full(n, float(self.g0))
        if self.kind == "two_point":
            return np.where(rng.random(n) < self.p1, self.v1, self.v2)
        mu, sig = self._log_params()
        return np.exp(mu + sig * rng.standard_normal(n))


@lru_cache(maxsize=None)
def _hermite(n):
    return special.roots_hermite(n)


@dataclass(frozen=True)
class ExclusionRegion:
    """Region without interferers: ``none``, an ``interval(a, b)`` on the
    line, or ``ball_union(points)`` on the plane."""

    kind: str = "none"
    a: float = 0.0
    b: float = 0.0
    points: tuple = ()

    @classmethod
    def interval(cls, a: float, b: float):
        if not a <= b:
            raise DomainError("interval needs a <= b")
        return cls("interval", a=a, b=b)

    @classmethod
    def ball_union(cls, points: Sequence[complex]):
        pts = tuple(complex(p) for p in np.atleast_1d(points))
        if not pts or any(p == 0 for p in pts):
            raise DomainError("ball_union needs non-zero points")
        return cls("ball_union", points=pts)


# ---------------------------------------------------------------------------
# quadrature over the complement of a union of balls through the origin


@lru_cache(maxsize=None)
def _gl01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@lru_cache(maxsize=None)
def _jacobi01(n, beta):
    # weight v^beta on [0, 1]
    x, w = special.roots_jacobi(n, 0.0, beta)
    return 0.5 * (x + 1), w * 0.5 ** (beta + 1)


def envelope_breakpoints(points: np.ndarray) -> np.ndarray:
    z = np.asarray(points, dtype=complex)
    th = np.angle(z)
    brk = [th + math.pi / 2, th - math.pi / 2]
    if z.size > 1:
        i, j = np.triu_indices(z.size, 1)
        d = np.angle(z[i] - z[j])
        brk += [d + math.pi / 2, d - math.pi / 2]
    b = np.unique(np.mod(np.concatenate(brk), 2 * math.pi))
    return np.concatenate([[0.0], b[b > 1e-14], [2 * math.pi]])


def exterior_nodes(points, decay: float, n_phi: int = 40, n_rho: int = 40, n_tail: int = 40):
    """Nodes ``x`` and weights for ``int_{C minus B_N} F(x) dx``.

    ``F`` should be smooth on the closed region and decay like
    ``|x|^{-decay}`` with ``decay > 2``.
    """
    if decay <= 2:
        raise DomainError("exterior integrals need decay > 2")
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    c = 2.0 * np.abs(z).max()
    brk = envelope_breakpoints(z)
    u, wu = _gl01(n_phi)
    phi = (brk[:-1, None] + np.diff(brk)[:, None] * u).ravel()
    wphi = (np.diff(brk)[:, None] * wu).ravel()
    rho0 = np.maximum(0.0, 2.0 * (z[None, :] * np.exp(-1j * phi)[:, None]).real.max(axis=1))
    # finite part [rho0, c]
    t, wt = _gl01(n_rho)
    rho_a = rho0[:, None] + (c - rho0)[:, None] * t
    w_a = wphi[:, None] * (c - rho0)[:, None] * wt * rho_a
    # tail [c, inf): rho = c / v, dx = rho drho dphi = c^2 v^{-3} dv dphi
    beta = decay - 3.0
    v, wv = _jacobi01(n_tail, beta)
    rho_b = c / v
    w_b = wphi[:, None] * (c * c * v ** (-3.0 - beta) * wv)[None, :]
    e = np.exp(1j * phi)[:, None]
    x = np.concatenate([(rho_a * e).ravel(), (rho_b[None, :] * e).ravel()])
    w = np.concatenate([w_a.ravel(), w_b.ravel()])
    return x, w


def _radial_nodes(a: float, decay: float, n_fin: int = 48, n_tail: int = 48):
    """Nodes on ``[a, inf)`` for ``int_a^inf g(r) r dr`` with ``g ~ r^{-decay}``."""
    c = 2.0 * a
    t, wt = _gl01(n_fin)
    r_a = a + (c - a) * t
    w_a = (c - a) * wt * r_a
    beta = decay - 3.0
    v, wv = _jacobi01(n_tail, beta)
    r_b = c / v
    w_b = c * c * v ** (-3.0 - beta) * wv
    return np.concatenate([r_a, r_b]), np.concatenate([w_a, w_b])


# ---------------------------------------------------------------------------
# transforms


def _is_line(z_vec, region: ExclusionRegion) -> bool:
    if region.kind == "interval":
        return True
    if region.kind == "ball_union":
        return False
    return not np.iscomplexobj(np.asarray(z_vec))


def laplace_transform(
    s_vec,
    z_vec,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    region: ExclusionRegion = ExclusionRegion(),
    spec: QuadratureSpec = DEFAULT_SPEC,
) -> complex:
    """``E[exp(-sum_i s_i I(z_i))]`` with no interferer in the excluded region."""
    s = np.atleast_1d(np.asarray(s_vec, dtype=complex))
    z = np.atleast_1d(np.asarray(z_vec))
    if s.shape != z.shape:
        raise DomainError("s_vec and z_vec must have the same length")
    if np.any(s.real < 0):
        raise DomainError("Re(s) must be >= 0")
    if np.all(s == 0):
        return 1.0 + 0j

    def one_minus_g(x):
        arg = sum(si * prop.h(np.abs(zi - x)) for si, zi in zip(s, z))
        return marks.one_minus_laplace(arg)

    if _is_line(z, region):
        lo, hi = (region.a, region.b) if region.kind == "interval" else (0.0, 0.0)
        if region.kind == "none":
            if prop.is_power_law and prop.r_min == 0:
                raise NonConvergent("power law without exclusion is not integrable at the receivers")
        total = 0j
        for edge, part in ((lo, lambda t: one_minus_g(lo - t)), (hi, lambda t: one_minus_g(hi + t))):
            d = max(float(np.min(np.abs(z.real - edge))), 1e-3)
            ext = replace(spec, abs_tol=1e-300, semi_infinite_map="algebraic", scale=1.0 / d)
            re = integrate(lambda t: part(t).real, 0.0, math.inf, ext, points=None)[0]
            im = integrate(lambda t: part(t).imag, 0.0, math.inf, ext, points=None)[0]
            total += re + 1j * im
        if region.kind == "none":
            re = integrate(lambda t: one_minus_g(t).real, lo, hi, spec)[0] if hi > lo else 0.0
            total += re
        return complex(np.exp(-lam * total))

    if region.kind == "none":
        raise NonConvergent("plane transform needs an exclusion region around the receivers")
    pts = np.asarray(region.points)
    x, w = exterior_nodes(pts, prop.decay, n_phi=64, n_rho=48, n_tail=48)
    val = np.sum(w * one_minus_g(x))
    return complex(np.exp(-lam * val))


def conditional_laplace(s, z, lam: float, prop: PropagationModel, marks: MarkModel, closed_form: bool = True):
    """``E[exp(-s I(z)) | z in C(0)]`` on the plane (vectorised in ``s``).

    The power-law closed form is
    ``log L = -pi lam rho^2 sum_j p_j J(s v_j h(rho))`` with
    ``J(c) = c^{2/eta} gamma(1 - 2/eta, c) - 1 + e^{-c}``.
    """
    rho = abs(z)
    if rho == 0:
        raise DomainError("z must be non-zero")
    s = np.asarray(s, dtype=complex)
    v, p = marks.atoms()
    if closed_form and prop.closed_form_from(rho):
        eta = prop.eta
        c = s[..., None] * v * float(prop.h(rho))
        bexp = 1.0 - 2.0 / eta
        with np.errstate(invalid="ignore", divide="ignore"):
            J = np.where(c == 0, 0.0, c ** (2.0 / eta) * lower_gamma_complex(bexp, c) + np.expm1(-c))
        return np.exp(-math.pi * lam * rho * rho * (J @ p))
    # r = rho t^{-p} flattens the r^{1-decay} tail on t in (0, 1]
    p = 1.0 / (prop.decay - 2.0)
    spec = replace(DEFAULT_SPEC, abs_tol=1e-13, rel_tol=1e-11)
    out = np.empty(s.shape, dtype=complex)
    for idx, si in np.ndenumerate(s):

        def f(t, si=si):
            r = rho * t ** (-p)
            return r * marks.one_minus_laplace(si * prop.h(r)) * rho * p * t ** (-p - 1)

        val = integrate_complex(f, 0.0, 1.0, spec)[0]
        out[idx] = np.exp(-2 * math.pi * lam * val)
    return out if out.ndim else complex(out)


def conditional_char_fn(z, lam: float, prop: PropagationModel, marks: MarkModel):
    """Characteristic function ``s -> E[exp(-i s I(z)) | z]``."""
    return lambda s: conditional_laplace(1j * np.asarray(s, dtype=complex), z, lam, prop, marks)


def conditional_moments(z, lam: float, prop: PropagationModel, marks: MarkModel, spec: QuadratureSpec = DEFAULT_SPEC):
    """Mean and variance of ``I(z)`` given ``z`` in the typical cell."""
    rho = abs(z)
    if rho == 0:
        raise DomainError("z must be non-zero")
    if prop.is_power_law and prop.eta <= 2:
        raise DomainError("eta must exceed 2")
    m1, m2 = marks.mean, marks.second_moment
    if m1 == 0 and m2 == 0:
        return 0.0, 0.0
    mean = 2 * math.pi * lam * m1 * prop.H_plane(rho, spec)
    var = 2 * math.pi * lam * m2 * prop.H2_plane(rho, spec)
    return mean, var


def _exterior_points(z_list, region: ExclusionRegion):
    if region.kind == "ball_union":
        return np.asarray(region.points)
    if region.kind == "none":
        return np.asarray(z_list, dtype=complex)
    raise DomainError("plane computations need a ball_union region")


def conditional_mean_region(z, lam, prop: PropagationModel, marks: MarkModel, region: ExclusionRegion, nodes=None):
    """``lam E[G] int_{C minus region} h(|z - x|) dx``."""
    x, w = nodes if nodes is not None else exterior_nodes(_exterior_points([z], region), prop.decay)
    return lam * marks.mean * float(np.sum(w * prop.h(np.abs(z - x))))


def conditional_covariance(
    z,
    z2,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    region: Optional[ExclusionRegion] = None,
    nodes=None,
) -> float:
    """``Cov(I(z), I(z2))`` with no interferer in ``B(z,|z|) u B(z2,|z2|)``."""
    if z == 0 or z2 == 0:
        raise DomainError("points must be non-zero")
    if marks.second_moment == 0:
        return 0.0
    if nodes is None:
        region = region or ExclusionRegion.ball_union([z, z2])
        nodes = exterior_nodes(_exterior_points([z, z2], region), 2 * prop.decay, 48, 48, 48)
    x, w = nodes
    val = np.sum(w * prop.h(np.abs(z - x)) * prop.h(np.abs(z2 - x)))
    return lam * marks.second_moment * float(val)


def gaussian_limit_params(
    z_vec,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    region: Optional[ExclusionRegion] = None,
):
    """Conditional mean vector and covariance matrix of ``(I(z_i))``.

    With one point, the region ``B(z, |z|)`` and a power law, the variance is
    ``pi lam E[G^2] h(|z|)^2 |z|^2 / (eta - 1)``.
    """
    z = np.atleast_1d(np.asarray(z_vec, dtype=complex))
    region = region or ExclusionRegion.ball_union(z)
    if (
        z.size == 1
        and region.kind == "ball_union"
        and len(region.points) == 1
        and region.points[0] == z[0]
    ):
        m, v = conditional_moments(z[0], lam, prop, marks)
        return np.array([m]), np.array([[v]])
    pts = _exterior_points(z, region)
    x1, w1 = exterior_nodes(pts, prop.decay)
    x2, w2 = exterior_nodes(pts, 2 * prop.decay, 48, 48, 48)
    H1 = prop.h(np.abs(z[:, None] - x1[None, :]))
    H2 = prop.h(np.abs(z[:, None] - x2[None, :]))
    mean = lam * marks.mean * (H1 @ w1)
    cov = lam * marks.second_moment * ((H2 * w2) @ H2.T)
    return mean, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# direct field simulation


def simulate_conditional_field(
    z,
    lam: float,
    prop: PropagationModel,
    marks: MarkModel,
    rng: np.random.Generator,
    n_fields: int,
    outer_radius: float,
    chunk: int = 2_000_000,
) -> np.ndarray:
    """Samples of ``I(z)`` given ``z`` in the typical cell (plane).

    Interferers are drawn in the annulus ``|x - z| in [|z|, outer_radius]``
    (only their distances to ``z`` matter). The contribution beyond
    ``outer_radius`` is replaced by its mean.
    """
    a = abs(z)
    if not outer_radius > a:
        raise DomainError("outer_radius must exceed |z|")
    tail = 2 * math.pi * lam * marks.mean * prop.H_plane(outer_radius)
    counts = rng.poisson(lam * math.pi * (outer_radius**2 - a * a), size=n_fields)
    out = np.empty(n_fields)
    start = 0
    while start < n_fields:
        stop = start + 1
        total = counts[start]
        while stop < n_fields and total + counts[stop] <= chunk:
            total += counts[stop]
            stop += 1
        r2 = a * a + (outer_radius**2 - a * a) * rng.random(total)
        g = marks.sample(rng, total)
        contrib = g * prop.h(np.sqrt(r2))
        idx = np.repeat(np.arange(stop - start), counts[start:stop])
        out[start:stop] = np.bincount(idx, weights=contrib, minlength=stop - start)
        start = stop
    return out + tail
