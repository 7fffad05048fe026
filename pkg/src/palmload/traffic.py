"""
Rates, traffic models and the load integrand ``f(r, I)``.

Integrands depend on the user position only through ``r = |z|`` and are
vectorised: ``f(r, I)`` broadcasts over arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError, NoConvergence, Unstable
from .numerics import exp_scaled_e1, integrate
from .shotnoise import MarkModel, PropagationModel

LN2 = math.log(2.0)


@dataclass(frozen=True)
class RateModel:
    """Map from SINR to bit rate.

    ``kind`` is one of ``shannon``, ``modified_shannon``, ``linear`` or
    ``rayleigh``; ``best_channel_gain`` multiplies the rate.
    """

    kind: str = "shannon"
    w: float = 5e6
    w_scale: float = 0.75
    s_scale: float = 1.25
    best_channel_gain: float = 1.0

    def __post_init__(self):
        if self.kind not in ("shannon", "modified_shannon", "linear", "rayleigh"):
            raise ConfigError(f"unknown rate model {self.kind!r}")
        if not self.w > 0:
            raise ConfigError("bandwidth must be positive")
        if self.best_channel_gain < 1:
            raise ConfigError("best_channel_gain must be >= 1")


@dataclass(frozen=True)
class TrafficSpec:
    """Traffic model. ``lam_us`` is the user arrival density per km^2 per s."""

    kind: str
    lam_us: float
    mu: float = 1.0
    C: int = 1
    R_min: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("voice", "streaming", "adaptive", "elastic"):
            raise ConfigError(f"unknown traffic kind {self.kind!r}")
        if not (self.lam_us > 0 and self.mu > 0 and self.sigma > 0):
            raise ConfigError("traffic rates and means must be positive")
        if int(self.C) != self.C or self.C < 1:
            raise ConfigError("C must be an integer >= 1")
        if self.kind == "streaming" and not self.R_min > 0:
            raise ConfigError("streaming needs R_min > 0")


@dataclass(frozen=True)
class ReuseScheme:
    """Frequency reuse. Hard reuse is soft reuse with ``kappa = 0`` and
    ``r_edge = 0``."""

    kind: str = "none"
    b: int = 1
    kappa: float = 1.0
    r_edge: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "hard", "soft"):
            raise ConfigError(f"unknown reuse kind {self.kind!r}")
        if self.kind != "none":
            if int(self.b) != self.b or self.b < 1:
                raise ConfigError("b must be an integer >= 1")
            if self.kind == "soft" and not (0 < self.kappa <= 1):
                raise ConfigError("kappa must lie in (0, 1]")
            if self.r_edge < 0:
                raise ConfigError("r_edge must be >= 0")

    @classmethod
    def hard(cls, b: int):
        return cls("hard", b=b, kappa=0.0, r_edge=0.0)

    @classmethod
    def soft(cls, b: int, kappa: float, r_edge: float = 0.0):
        return cls("soft", b=b, kappa=kappa, r_edge=r_edge)

    @property
    def effective_kappa(self) -> float:
        return 0.0 if self.kind == "hard" else self.kappa


@dataclass
class LoadIntegrand:
    """Load density ``f(r, I)`` with structure tags.

    ``tag`` is ``general``, ``no_interference`` (``f = f0(r)``) or
    ``affine`` (``f = f0(r) + f1(r) I``). ``channel`` names the interference
    the integrand consumes: ``full``, ``edge`` or ``center``.
    """

    f: Callable
    tag: str = "general"
    f0: Optional[Callable] = None
    f1: Optional[Callable] = None
    dfdI: Optional[Callable] = None
    channel: str = "full"
    reuse: ReuseScheme = field(default_factory=ReuseScheme)
    constant: Optional[float] = None

    def __call__(self, r, I):
        return self.f(r, I)

    def F0(self, r):
        """``int_0^r f0``."""
        if self.tag == "general":
            raise DomainError("F0 needs an interference-free part")
        if self.constant is not None:
            return self.constant * np.asarray(r, dtype=float)
        return np.vectorize(lambda x: integrate(self.f0, 0.0, x)[0] if x > 0 else 0.0)(r)

    def derivative(self, r, I):
        """``df/dI``; central differences when no closed form is attached."""
        if self.dfdI is not None:
            return self.dfdI(r, I)
        if self.tag == "affine":
            return np.broadcast_to(self.f1(r), np.broadcast(r, I).shape)
        if self.tag == "no_interference":
            return np.zeros(np.broadcast(r, I).shape)
        I = np.asarray(I, dtype=float)
        d = 1e-6 * np.maximum(np.abs(I), 1e-12)
        lo = np.maximum(I - d, 0.0)
        return (self.f(r, I + d) - self.f(r, lo)) / (I + d - lo)

    @classmethod
    def constant_density(cls, c: float) -> "LoadIntegrand":
        c = float(c)
        f0 = lambda r: np.full(np.shape(r), c)
        return cls(lambda r, I: np.full(np.broadcast(r, I).shape, c), "no_interference", f0=f0, constant=c)

    @classmethod
    def from_f0(cls, f0: Callable) -> "LoadIntegrand":
        return cls(lambda r, I: f0(np.broadcast_to(r, np.broadcast(r, I).shape)), "no_interference", f0=f0)

    @classmethod
    def affine(cls, f0: Callable, f1: Callable) -> "LoadIntegrand":
        return cls(lambda r, I: f0(r) + f1(r) * I, "affine", f0=f0, f1=f1)


# ---------------------------------------------------------------------------


def sinr(r, I, prop: PropagationModel):
    """``h(r) / (N0 w + I)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) and prop.is_power_law and prop.r_min == 0:
        raise DomainError("SINR is unbounded at r = 0")
    return prop.h(r) / (prop.noise + np.asarray(I, dtype=float))


def data_rate(S, model: RateModel):
    """Bit rate at SINR ``S``."""
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise DomainError("SINR must be >= 0")
    w = model.w
    if model.kind == "shannon":
        out = w * np.log1p(S) / LN2
    elif model.kind == "modified_shannon":
        out = model.w_scale * w * np.log1p(S / model.s_scale) / LN2
    elif model.kind == "linear":
        out = w * S / LN2
    else:
        with np.errstate(divide="ignore"):
            inv = np.where(S > 0, 1.0 / np.where(S > 0, S, 1.0), np.inf)
        out = np.where(S > 0, w * exp_scaled_e1(np.minimum(inv, 1e300)) / LN2, 0.0)
    return model.best_channel_gain * out


def _band_geometry(reuse: ReuseScheme, band: str):
    """Bandwidth fraction, SINR multiplier and radial support of a band."""
    if reuse.kind == "none":
        if band != "full":
            raise ConfigError("edge/center bands need a reuse scheme")
        return 1.0, 1.0, (0.0, math.inf)
    b = reuse.b
    if reuse.kind == "hard":
        if band == "center":
            raise ConfigError("hard reuse has no center band")
        return 1.0 / b, 1.0, (0.0, math.inf)
    if band == "edge":
        return 1.0 / b, 1.0, (reuse.r_edge, math.inf)
    if band == "center":
        return (b - 1.0) / b, reuse.kappa, (0.0, reuse.r_edge)
    raise ConfigError("soft reuse needs band 'edge' or 'center'")


def build_integrand(
    traffic: TrafficSpec,
    rate: RateModel,
    prop: PropagationModel,
    reuse: ReuseScheme = ReuseScheme(),
    band: str = "full",
) -> LoadIntegrand:
    """Load density for a traffic model, rate map and reuse band."""
    if band not in ("full", "edge", "center"):
        raise ConfigError(f"unknown band {band!r}")
    if traffic.kind in ("voice", "adaptive"):
        if reuse.kind != "none" or band != "full":
            raise ConfigError("reuse bands apply to rate-dependent traffic only")
        return LoadIntegrand.constant_density(traffic.lam_us / traffic.mu)

    frac, gain, (lo, hi) = _band_geometry(reuse, band)
    sub_rate = RateModel(rate.kind, rate.w * frac, rate.w_scale, rate.s_scale, rate.best_channel_gain)
    channel = "full" if reuse.kind == "none" else ("edge" if band in ("full", "edge") else "center")

    def support(r):
        r = np.asarray(r, dtype=float)
        return (r >= lo) & (r < hi)

    def S_of(r, I):
        return gain * sinr(r, I, prop)

    if traffic.kind == "streaming":
        c = traffic.lam_us / (traffic.C * traffic.mu)

        def f(r, I):
            R = data_rate(S_of(r, I), sub_rate)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(R > 0, traffic.R_min / R, np.inf)
                circuits = np.where(np.isfinite(ratio), np.ceil(traffic.C * ratio), 0.0)
            return np.where(support(r) & (ratio <= traffic.C), c * circuits, 0.0)

        return LoadIntegrand(f, "general", channel=channel, reuse=reuse)

    # elastic
    c = traffic.sigma * traffic.lam_us
    N = prop.noise
    if gain == 0:
        raise ConfigError("a band with zero power cannot carry users")
    if rate.kind == "linear":
        k = c * LN2 / (sub_rate.w * gain * rate.best_channel_gain)

        def f0(r):
            return np.where(support(r), k * N / prop.h(r), 0.0)

        def f1(r):
            return np.where(support(r), k / prop.h(r), 0.0)

        integ = LoadIntegrand.affine(f0, f1)
        integ.channel, integ.reuse = channel, reuse
        return integ

    def f(r, I):
        R = data_rate(S_of(r, I), sub_rate)
        with np.errstate(divide="ignore"):
            return np.where(support(r), c / R, 0.0)

    dfdI = None
    if rate.kind == "shannon":
        kk = c * LN2 / (sub_rate.w * rate.best_channel_gain)

        def dfdI(r, I):
            h = gain * prop.h(r)
            NI = N + np.asarray(I, dtype=float)
            L = np.log1p(h / NI)
            return np.where(support(r), kk * h / (NI * (NI + h) * L * L), 0.0)

    return LoadIntegrand(f, "general", dfdI=dfdI, channel=channel, reuse=reuse)


# ---------------------------------------------------------------------------
# queueing formulas


def erlang_b(C: int, rho: float) -> float:
    """Erlang B blocking probability by the stable recursion."""
    if C < 0 or int(C) != C:
        raise DomainError("C must be a nonnegative integer")
    if rho < 0:
        raise DomainError("rho must be >= 0")
    B = 1.0
    for k in range(1, int(C) + 1):
        B = rho * B / (k + rho * B)
    return B


def multirate_blocking(C: int, classes) -> list[float]:
    """Per-class blocking of the multi-rate loss system (Kaufman-Roberts)."""
    C = int(C)
    q = np.zeros(C + 1)
    q[0] = 1.0
    for n in range(1, C + 1):
        q[n] = sum(rho * d * q[n - d] for rho, d in classes if d <= n) / n
    total = q.sum()
    return [float(q[max(C - int(d) + 1, 0):].sum() / total) for _, d in classes]


def mm_infty_throughput_factor(rho: float) -> float:
    """``(1 - e^{-rho}(1 + rho)) / (rho (1 - e^{-rho}))``."""
    if rho <= 0:
        raise DomainError("rho must be positive")
    if rho < 1e-4:
        return 0.5 - rho / 12.0
    return (-math.expm1(-rho) - rho * math.exp(-rho)) / (rho * -math.expm1(-rho))


def ps_mean_users(rho: float) -> float:
    """Mean number of flows in an M/G/1 processor-sharing queue."""
    if rho < 0:
        raise DomainError("rho must be >= 0")
    if rho >= 1:
        raise Unstable(f"load {rho} >= 1: the queue grows without bound")
    return rho / (1.0 - rho)


def reuse_mark_model(scheme: ReuseScheme) -> MarkModel:
    """Law of the interference marks seen on one sub-band."""
    if scheme.kind == "none":
        raise ConfigError("no reuse scheme given")
    if scheme.b == 1:
        return MarkModel("deterministic", g0=1.0)
    return MarkModel("two_point", p1=1.0 / scheme.b, v1=1.0, v2=scheme.effective_kappa)


def activity_fixed_point(load_of_p: Callable[[float], float], tol: float = 1e-8, max_iter: int = 200) -> float:
    """Solve ``p = min(load_of_p(p), 1)`` on ``[0, 1]``."""
    g = lambda p: min(float(load_of_p(p)), 1.0)
    p = g(1.0)
    for _ in range(max_iter):
        nxt = 0.5 * p + 0.5 * g(p)
        if abs(nxt - p) < tol * 0.1 and abs(g(nxt) - nxt) < tol:
            return nxt
        p = nxt
    lo, hi = 0.0, 1.0
    if g(hi) - hi >= 0:
        return 1.0
    if g(lo) - lo < 0:
        raise NoConvergence("no fixed point in [0, 1]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) - mid >= 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    p = 0.5 * (lo + hi)
    # a continuous map leaves a residual of order tol; a jump leaves more
    if abs(g(p) - p) > 1e3 * tol:
        raise NoConvergence(f"no fixed point found: residual {abs(g(p) - p):.3g} at p = {p:.6g}")
    return p


# ---------------------------------------------------------------------------
# reference parameter set


def dbm_to_mw(x: float) -> float:
    return 10.0 ** (x / 10.0)


def reference_propagation(
    eta: float = 3.5,
    tx_power_dBm: float = 46.0,
    N0_dBm_per_Hz: float = -174.0,
    w: float = 5e6,
    noise: bool = True,
) -> PropagationModel:
    """Urban macro parameter set with distances in km.

    The path gain is ``10^{-12.8} r^{-eta}`` (128 dB loss at 1 km). Powers
    are in mW.
    """
    return PropagationModel(
        "power_law",
        P=10.0 ** (-12.8),
        eta=eta,
        tx_power=dbm_to_mw(tx_power_dBm),
        noise_density=dbm_to_mw(N0_dBm_per_Hz) if noise else 0.0,
        bandwidth=w,
    )


def reference_elastic(sigma_lam_us: float = 1e7) -> TrafficSpec:
    """Elastic traffic with ``sigma lam_us`` bits/s/km^2 (sigma = 1 bit)."""
    return TrafficSpec("elastic", lam_us=sigma_lam_us, sigma=1.0)
