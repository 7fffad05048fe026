import math

import numpy as np
import pytest
from scipy import stats

from helpers import exp_gain, line_exp_run, line_run, within
from palmload.errors import Diverges, DomainError
from palmload.line import (
    line_closed_form_case,
    line_laplace_affine,
    line_laplace_no_interf,
    line_mean_load,
    line_transform,
)
from palmload.shotnoise import MarkModel, PropagationModel
from palmload.traffic import LoadIntegrand

ONE = MarkModel()
ZERO_MARKS = MarkModel("deterministic", g0=0.0)


def ks_upper_bound(x, cdf, n_grid=1000):
    """Upper bound on sup|F_n - F| from F on a grid, using monotonicity of both."""
    x = np.sort(x)
    t = np.quantile(x, np.linspace(0, 1, n_grid))
    F = np.asarray(cdf(t), dtype=float)
    Fn_right = np.searchsorted(x, t, side="right") / x.size
    Fn_left = np.searchsorted(x, t, side="left") / x.size
    # on [t_i, t_{i+1}]: F_n in [Fn_right_i, Fn_left_{i+1}], F in [F_i, F_{i+1}]
    up = Fn_left[1:] - F[:-1]
    down = F[1:] - Fn_right[:-1]
    return float(max(up.max(), down.max(), F[0], 1 - F[-1]))


def ident(r):
    return np.asarray(r, dtype=float)


def const(r):
    return np.ones_like(np.asarray(r, dtype=float))


def zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


# --- interference-free transform ---------------------------------------------


@pytest.mark.parametrize("s", [0.5, 2.0, 1.0 + 1.0j])
@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_no_interf_constant_is_two_exponentials(s, lam):
    got = line_laplace_no_interf(s, const, lam)
    assert abs(got - (2 * lam / (2 * lam + s)) ** 2) < 1e-10


def test_no_interf_at_zero_and_domain():
    assert line_laplace_no_interf(0.0, ident, 1.0) == 1.0
    with pytest.raises(DomainError):
        line_laplace_no_interf(-1.0, const, 1.0)


def test_no_interf_matches_simulation():
    s = line_run("r", n=100_000)
    e = np.exp(-s.loads)
    L = line_laplace_no_interf(1.0, ident, 1.0).real
    assert within(e.mean(), L, e.std(ddof=1) / math.sqrt(e.size))


# --- closed forms -------------------------------------------------------------


def test_closed_form_means():
    assert line_closed_form_case("constant", 1.0).mean == pytest.approx(1.0)
    assert line_closed_form_case("constant", 4.0).mean == pytest.approx(0.25)
    assert line_closed_form_case("power", 1.0, alpha=1.0).mean == pytest.approx(0.5)
    with pytest.raises(DomainError):
        line_closed_form_case("power", 1.0, alpha=-0.5)


def test_closed_form_variance_matches_sampler():
    law = line_closed_form_case("power", 1.0, alpha=1.0)
    x = law.sample(np.random.default_rng(0), 400_000)
    assert x.var() == pytest.approx(law.variance, rel=0.03)


def test_closed_form_power_cdf_matches_simulation():
    law = line_closed_form_case("power", 1.0, alpha=1.0)
    loads = line_run("r", n=100_000).loads
    assert ks_upper_bound(loads, law.cdf) < 0.02
    med = np.median(loads)
    assert float(law.cdf(med)) == pytest.approx(0.5, abs=0.02)


def test_closed_form_constant_cdf_matches_simulation():
    law = line_closed_form_case("constant", 1.0)
    assert stats.kstest(line_run("constant").loads, law.cdf).statistic < 0.02


def test_closed_form_transform_consistency():
    law = line_closed_form_case("power", 2.0, alpha=1.0)
    x = law.sample(np.random.default_rng(1), 200_000)
    e = np.exp(-0.7 * x)
    L = line_laplace_no_interf(0.7, ident, 2.0).real
    assert within(e.mean(), L, e.std(ddof=1) / math.sqrt(e.size))


# --- affine transform ------------------------------------------------------------


def test_affine_without_f1_reduces_to_no_interference():
    prop = exp_gain()
    for s in (0.3, 1.5, 0.5 + 2j):
        a = line_laplace_affine(s, ident, zero, 1.0, prop, ONE)
        b = line_laplace_no_interf(s, ident, 1.0)
        assert abs(a - b) < 1e-8


def test_affine_zero_marks_equals_no_interference():
    prop = exp_gain()
    for s in (0.3, 1.5):
        a = line_laplace_affine(s, ident, const, 1.0, prop, ZERO_MARKS)
        b = line_laplace_affine(s, ident, None, 1.0, prop, ONE)
        assert a == b
        assert abs(a - line_laplace_no_interf(s, ident, 1.0)) < 1e-8


def test_affine_at_zero():
    assert line_laplace_affine(0.0, zero, const, 1.0, exp_gain(), ONE) == 1.0


def test_affine_matches_simulation():
    s = line_exp_run()
    e = np.exp(-0.5 * s.loads)
    L = line_laplace_affine(0.5, zero, const, 1.0, exp_gain(), ONE).real
    assert within(e.mean(), L, e.std(ddof=1) / math.sqrt(e.size))


def test_affine_power_law_divergence():
    prop = PropagationModel(P=1.0, eta=3.5)
    with pytest.raises(Diverges):
        line_laplace_affine(1.0, zero, const, 1.0, prop, ONE)
    with pytest.raises(Diverges):
        line_mean_load(zero, const, 1.0, prop, ONE)
    with pytest.raises(Diverges):
        line_mean_load(zero, lambda r: np.asarray(r, float) ** 3.5, 1.0, PropagationModel(P=1.0, eta=1.0), ONE)


def test_affine_power_law_with_vanishing_f1_is_finite():
    eta = 3.5
    prop = PropagationModel(P=1.0, eta=eta)
    f1 = lambda r: np.asarray(r, float) ** eta
    m = line_mean_load(zero, f1, 1.0, prop, ONE)
    # 2 int 2 H(r) r^eta e^{-2r} dr with H(r) = r^{1-eta}/(eta-1)
    assert m == pytest.approx(4 / (eta - 1) * math.gamma(3) / 2**3, rel=1e-8)
    h = 1e-5
    d = (1 - line_laplace_affine(h, zero, f1, 1.0, prop, ONE).real) / h
    assert d == pytest.approx(m, rel=1e-4)


# --- mean load ------------------------------------------------------------------


def test_mean_load_examples():
    prop = exp_gain()
    assert line_mean_load(const, None, 2.0, prop, ONE) == pytest.approx(0.5, rel=1e-10)
    assert line_mean_load(ident, None, 1.0, prop, ONE) == pytest.approx(0.5, rel=1e-10)
    # 2 int 2 e^{-r} e^{-2r} dr = 4/3
    assert line_mean_load(zero, const, 1.0, prop, ONE) == pytest.approx(4 / 3, rel=1e-10)


def test_mean_load_matches_simulation():
    s = line_exp_run()
    assert within(s.mean, line_mean_load(zero, const, 1.0, exp_gain(), ONE), s.stderr)


def test_mean_load_matches_constant_simulation():
    s = line_run("constant")
    assert within(s.mean, 1.0, s.stderr)


# --- invariants ------------------------------------------------------------------


@pytest.mark.parametrize(
    "f0,f1",
    [(ident, None), (const, const), (zero, const), (ident, lambda r: 1 + np.asarray(r, float))],
)
def test_transform_derivative_equals_mean(f0, f1):
    prop, h = exp_gain(), 1e-5
    m = line_mean_load(f0, f1, 1.0, prop, ONE)
    if f1 is None:
        L = line_laplace_no_interf(h, f0, 1.0).real
    else:
        L = line_laplace_affine(h, f0, f1, 1.0, prop, ONE).real
    assert (1 - L) / h == pytest.approx(m, rel=1e-4)


def test_transforms_completely_monotone():
    s = np.linspace(0.0, 6.0, 13)
    prop = exp_gain()
    for fn in (lambda x: line_laplace_no_interf(x, ident, 1.0), lambda x: line_laplace_affine(x, const, const, 1.0, prop, ONE)):
        v = np.array([fn(x).real for x in s])
        assert np.all(v > 0) and v[0] == 1.0
        assert np.all(np.diff(v) < 0)
        assert np.all(np.diff(v, 2) > -1e-12)


def test_transform_bounded_on_half_plane():
    prop = exp_gain()
    for s in (0.1 + 3j, 2 - 5j, 10j):
        assert abs(line_laplace_affine(s, const, const, 1.0, prop, ONE)) <= 1 + 1e-12


def test_line_transform_wrapper():
    prop = exp_gain()
    T = line_transform(LoadIntegrand.constant_density(1.0), 1.0)
    assert T.tag == "no_interference" and T(0.0) == 1.0
    assert abs(T(1.0) - (2 / 3) ** 2) < 1e-10
    A = line_transform(LoadIntegrand.affine(zero, const), 1.0, prop, ONE)
    assert A.tag == "affine"
    assert A(0.5) == line_laplace_affine(0.5, zero, const, 1.0, prop, ONE)
    with pytest.raises(DomainError):
        line_transform(LoadIntegrand(lambda r, I: 1 / (1 + I)), 1.0, prop, ONE)
