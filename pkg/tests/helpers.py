"""Shared, cached Monte-Carlo runs for the test modules."""

import os
import time
from functools import lru_cache

import numpy as np

from palmload.simulator import SimConfig, simulate_integrands, simulate_load_distribution
from palmload.traffic import LoadIntegrand, RateModel, build_integrand, reference_elastic, reference_propagation

# 128 rays x 16 radial nodes agree with 4096 x 512 to about 1e-6 on frozen
# cells (see test_simulator.py), far below Monte-Carlo noise.
NODES = dict(angular_nodes=128, radial_nodes=16)
WORKERS = max(1, min(os.cpu_count() or 1, 8))
# wall time of each cached run, keyed by (name, args)
RUN_SECONDS: dict = {}


def timed(name, fn, *args):
    t = time.perf_counter()
    out = fn()
    RUN_SECONDS[(name,) + args] = time.perf_counter() - t
    return out


def elastic(rate: str, eta: float):
    prop = reference_propagation(eta)
    return build_integrand(reference_elastic(), RateModel(rate), prop), prop


@lru_cache(maxsize=None)
def area_run(lam: float, n: int = 10_000, seed: int = 11):
    cfg = SimConfig(lam=lam, integrand=LoadIntegrand.constant_density(1.0), label="area", n_samples=n, seed=seed, **NODES)
    return timed("area", lambda: simulate_load_distribution(cfg, workers=WORKERS), lam, n, seed)


@lru_cache(maxsize=None)
def elastic_runs(eta: float, lam: float = 1.0, n: int = 10_000, seed: int = 21):
    """Linear and Shannon elastic loads on the same cells."""
    prop = reference_propagation(eta)
    cfg = SimConfig(lam=lam, prop=prop, traffic=reference_elastic(), rate=RateModel("shannon"), n_samples=n, seed=seed, **NODES)
    integs = {rate: build_integrand(reference_elastic(), RateModel(rate), prop) for rate in ("linear", "shannon")}
    return timed("elastic", lambda: simulate_integrands(cfg, integs, workers=WORKERS), eta, lam, n, seed)


@lru_cache(maxsize=None)
def line_run(kind: str, lam: float = 1.0, n: int = 10_000, seed: int = 31):
    if kind == "constant":
        integ = LoadIntegrand.constant_density(1.0)
    elif kind == "r":
        integ = LoadIntegrand.from_f0(lambda r: np.asarray(r, dtype=float))
    else:
        raise ValueError(kind)
    # no interference: the window only has to contain the two neighbours
    cfg = SimConfig(dimension="line", lam=lam, integrand=integ, label=kind, n_samples=n, seed=seed, window_count=200)
    return simulate_load_distribution(cfg, workers=WORKERS)


def exp_gain():
    from palmload.shotnoise import PropagationModel

    return PropagationModel("custom", gain=lambda r: np.exp(-np.asarray(r, dtype=float)), tail_line=lambda r: float(np.exp(-r)))


@lru_cache(maxsize=None)
def line_exp_run(n: int = 100_000, seed: int = 33):
    """Line cells with f0 = 0, f1 = 1 and h(r) = exp(-r), full interference."""
    integ = LoadIntegrand.affine(lambda r: np.zeros_like(np.asarray(r, dtype=float)), lambda r: np.ones_like(np.asarray(r, dtype=float)))
    # exp(-50) is far below the Monte-Carlo noise, so a half-length of 50 suffices
    cfg = SimConfig(dimension="line", lam=1.0, prop=exp_gain(), integrand=integ, label="exp", n_samples=n, seed=seed, window_count=100, radial_nodes=32)
    return simulate_load_distribution(cfg, workers=WORKERS)


def within(value, expected, stderr, k=3.0):
    return abs(value - expected) <= k * stderr


@lru_cache(maxsize=None)
def field_samples(lam: float, z: complex, n: int, outer_radius: float, eta: float = 4.0, seed: int = 41):
    """Samples of I(z) given z in the typical cell (unit power law)."""
    from palmload.shotnoise import MarkModel, PropagationModel, simulate_conditional_field

    rng = np.random.default_rng(seed)
    prop = PropagationModel(P=1.0, eta=eta)
    return simulate_conditional_field(z, lam, prop, MarkModel(), rng, n, outer_radius)


def pair_field_samples(z1: complex, z2: complex, lam: float, n: int, radius: float, eta: float = 4.0, seed: int = 43):
    """Joint samples of (I(z1), I(z2)) with no interferer in B(z1,|z1|) u B(z2,|z2|).

    Points are drawn on the disk of the given radius about the origin.
    """
    rng = np.random.default_rng(seed)
    out = np.empty((n, 2))
    counts = rng.poisson(lam * np.pi * radius**2, size=n)
    for i, k in enumerate(counts):
        x = radius * np.sqrt(rng.random(k)) * np.exp(2j * np.pi * rng.random(k))
        keep = (np.abs(x - z1) > abs(z1)) & (np.abs(x - z2) > abs(z2))
        x = x[keep]
        out[i, 0] = np.sum(np.abs(x - z1) ** -eta)
        out[i, 1] = np.sum(np.abs(x - z2) ** -eta)
    return out
