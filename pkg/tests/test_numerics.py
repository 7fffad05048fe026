import math

import numpy as np
import pytest
from scipy import special

from palmload.errors import DomainError, NonConvergent, NotACharacteristicFunction
from palmload.numerics import (
    Exponential,
    Indicator,
    Polynomial,
    QuadratureSpec,
    Smooth,
    SquareIntegrable,
    exp_integral_e1,
    exp_scaled_e1,
    expectation_via_transform,
    gauss_legendre,
    integrate,
    lower_gamma_complex,
    lower_incomplete_gamma,
    moments_from_char_fn,
    survival_from_laplace,
)
from palmload.shotnoise import MarkModel, PropagationModel, conditional_char_fn, conditional_laplace


def normal_char_fn(m, v):
    return lambda s: np.exp(-1j * np.asarray(s) * m - 0.5 * v * np.asarray(s) ** 2)


# --- integrate --------------------------------------------------------------


@pytest.mark.parametrize(
    "f, expected",
    [
        (lambda r: math.exp(-r), 1.0),
        (lambda r: r * math.exp(-math.pi * r * r), 1 / (2 * math.pi)),
        (lambda r: r**2.5 * math.exp(-r), 1.875 * math.sqrt(math.pi)),
    ],
)
def test_integrate_semi_infinite_examples(f, expected):
    spec = QuadratureSpec()
    val, err = integrate(f, 0.0, math.inf, spec)
    assert val == pytest.approx(expected, rel=1e-8)
    assert err <= max(spec.abs_tol, spec.rel_tol * abs(val))


def test_integrate_algebraic_map_and_finite_interval():
    spec = QuadratureSpec(semi_infinite_map="algebraic")
    assert integrate(lambda r: 1 / (1 + r * r), 0.0, math.inf, spec)[0] == pytest.approx(math.pi / 2, rel=1e-8)
    assert integrate(math.sin, 0.0, math.pi)[0] == pytest.approx(2.0, rel=1e-10)
    assert integrate(math.sin, math.pi, 0.0)[0] == pytest.approx(-2.0, rel=1e-10)
    assert integrate(math.sin, 1.0, 1.0) == (0.0, 0.0)


def test_integrate_divergent_raises():
    with pytest.raises(NonConvergent):
        integrate(lambda r: 1.0 / r if r > 0 else 0.0, 0.0, 1.0, QuadratureSpec(max_subdivisions=50))


def test_integrate_is_linear():
    rng = np.random.default_rng(7)
    spec = QuadratureSpec()
    for _ in range(5):
        a, b = rng.normal(size=2)
        p1, p2 = rng.integers(0, 4, size=2)
        c1, c2 = rng.uniform(0.3, 3.0, size=2)
        f = lambda r: r**p1 * math.exp(-c1 * r)  # noqa: E731
        g = lambda r: r**p2 * math.exp(-c2 * r)  # noqa: E731
        lhs = integrate(lambda r: a * f(r) + b * g(r), 0.0, math.inf, spec)[0]
        rhs = a * integrate(f, 0.0, math.inf, spec)[0] + b * integrate(g, 0.0, math.inf, spec)[0]
        exact = a * math.gamma(p1 + 1) / c1 ** (p1 + 1) + b * math.gamma(p2 + 1) / c2 ** (p2 + 1)
        tol = 2 * max(spec.abs_tol, spec.rel_tol * (abs(a * exact) + abs(b * exact) + 1))
        assert abs(lhs - rhs) <= tol
        assert lhs == pytest.approx(exact, rel=1e-7, abs=1e-8)


@pytest.mark.parametrize(
    "kwargs",
    [dict(abs_tol=0.0), dict(rel_tol=-1.0), dict(max_subdivisions=0), dict(semi_infinite_map="tan"), dict(scale=0.0)],
)
def test_quadrature_spec_invariants(kwargs):
    with pytest.raises(DomainError):
        QuadratureSpec(**kwargs)


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(5, 1.0, 3.0)
    assert np.sum(w * x**9) == pytest.approx((3.0**10 - 1.0) / 10, rel=1e-13)


# --- special functions ------------------------------------------------------


@pytest.mark.parametrize("x", [0.0, 0.3, 1.0, 7.5])
def test_lower_gamma_s1(x):
    assert lower_incomplete_gamma(x, 1.0) == pytest.approx(1 - math.exp(-x), abs=1e-14)


def test_lower_gamma_infinite_limit():
    assert lower_incomplete_gamma(math.inf, 0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    for s in (0.7, 2.0, 4.5):
        assert lower_incomplete_gamma(math.inf, s) == pytest.approx(math.gamma(s), rel=1e-14)


def test_lower_gamma_quadrature_oracle():
    oracle = integrate(lambda t: t**-0.5 * math.exp(-t), 0.0, 1.0, QuadratureSpec(1e-12, 1e-12))[0]
    assert lower_incomplete_gamma(1.0, 0.5) == pytest.approx(oracle, rel=1e-9)


def test_lower_gamma_nondecreasing():
    xs = np.linspace(0.0, 20.0, 200)
    for s in (0.3, 1.0, 3.7):
        vals = [lower_incomplete_gamma(x, s) for x in xs]
        assert np.all(np.diff(vals) >= 0)


def test_lower_gamma_negative_s_recurrence():
    x, s = 2.0, -0.5
    lhs = lower_incomplete_gamma(x, s)
    rhs = (lower_incomplete_gamma(x, s + 1) + x**s * math.exp(-x)) / s
    assert lhs == pytest.approx(rhs, rel=1e-14)
    # analytic continuation of Gamma(s) - Gamma(s, x)
    assert lhs == pytest.approx(special.gamma(s) - _upper(s, x), rel=1e-10)
    with pytest.raises(DomainError):
        lower_incomplete_gamma(0.0, -0.5)
    with pytest.raises(DomainError):
        lower_incomplete_gamma(1.0, -1.0)


def _upper(s, x):
    # Gamma(s, x) for any real s by quadrature of its defining integral
    return integrate(lambda t: t ** (s - 1) * math.exp(-t), x, math.inf, QuadratureSpec(1e-14, 1e-12))[0]


def test_lower_gamma_complex_matches_real_and_large_argument():
    b = 0.6
    for x in (0.5, 5.0, 20.0, 60.0):
        v = complex(lower_gamma_complex(b, np.array([x]))[0])
        assert v.real == pytest.approx(special.gammainc(b, x) * special.gamma(b), rel=1e-12)
        assert abs(v.imag) < 1e-14
    # imaginary argument: derivative identity d/dc gamma(b, c) = c^{b-1} e^{-c}
    c = 3.0 + 15.0j
    d = 1e-5
    num = (lower_gamma_complex(b, np.array([c + d]))[0] - lower_gamma_complex(b, np.array([c - d]))[0]) / (2 * d)
    assert abs(num - c ** (b - 1) * np.exp(-c)) < 1e-8


def test_e1_quadrature_oracle():
    oracle = integrate(lambda t: math.exp(-t) / t, 1.0, math.inf, QuadratureSpec(1e-14, 1e-13))[0]
    assert abs(exp_integral_e1(1.0) - oracle) < 1e-10


def test_e1_small_x_series_oracle():
    x = 1e-8
    series = sum((-1) ** (k + 1) * x**k / (k * math.factorial(k)) for k in range(1, 10))
    assert exp_integral_e1(x) + math.log(x) == pytest.approx(-0.5772156649015329 + series, abs=1e-6)


def test_e1_bound_monotone_and_domain():
    xs = np.array([5.0, 10.0, 30.0, 100.0])
    assert np.all(exp_integral_e1(xs) < np.exp(-xs) / xs)
    grid = np.linspace(0.01, 20, 300)
    assert np.all(np.diff(exp_integral_e1(grid)) < 0)
    with pytest.raises(DomainError):
        exp_integral_e1(0.0)


def test_exp_scaled_e1_matches_direct():
    x = np.array([0.1, 0.9, 1.0, 3.0, 40.0, 700.0])
    direct = special.exp1(x[:5]) * np.exp(x[:5])
    out = exp_scaled_e1(x)
    np.testing.assert_allclose(out[:5], direct, rtol=1e-12)
    # asymptotic 1/x (1 - 1/x + 2/x^2)
    assert out[5] == pytest.approx((1 - 1 / 700 + 2 / 700**2 - 6 / 700**3) / 700, rel=1e-10)


# --- transform inversion -----------------------------------------------------


def test_point_mass_second_moment():
    c = 1.7
    assert expectation_via_transform(lambda s: np.exp(-1j * np.asarray(s) * c), Polynomial((0, 0, 1))) == pytest.approx(c * c, rel=1e-8)


def test_normal_mean_oracle():
    m, v = 2.3, 0.49
    assert abs(expectation_via_transform(normal_char_fn(m, v), Polynomial((0, 1))) - m) < 1e-6


def test_square_integrable_route_normal():
    # g(x) = exp(-x^2 / 2) has g_hat(s) = sqrt(2 pi) exp(-s^2 / 2)
    m, v = 0.8, 0.3
    g = SquareIntegrable(lambda s: math.sqrt(2 * math.pi) * np.exp(-np.asarray(s) ** 2 / 2))
    expected = math.exp(-m * m / (2 * (1 + v))) / math.sqrt(1 + v)
    assert expectation_via_transform(normal_char_fn(m, v), g) == pytest.approx(expected, rel=1e-7)


def test_indicator_route_normal():
    m, v = 1.0, 4.0
    p = expectation_via_transform(normal_char_fn(m, v), Indicator(-math.inf, 2.0))
    assert p == pytest.approx(special.ndtr((2.0 - m) / 2.0), abs=1e-7)


def test_normalisation_for_valid_char_fns():
    prop = PropagationModel(P=1.0, eta=4.0)
    for cf in (normal_char_fn(1.0, 2.0), conditional_char_fn(1.0, 1.0, prop, MarkModel())):
        assert expectation_via_transform(cf, Polynomial((1.0,))) == pytest.approx(1.0, abs=1e-12)
        assert expectation_via_transform(cf, Indicator()) == 1.0


def test_conditional_shot_noise_exponential_oracle():
    prop = PropagationModel(P=1.0, eta=4.0)
    z, lam = 1.0, 1.0
    cf = conditional_char_fn(z, lam, prop, MarkModel())
    val = expectation_via_transform(cf, Exponential(1.0))
    assert abs(val - conditional_laplace(1.0, z, lam, prop, MarkModel()).real) < 1e-6
    # independent oracle: generic quadrature of the conditional transform
    generic = conditional_laplace(1.0, z, lam, prop, MarkModel(), closed_form=False).real
    assert abs(val - generic) < 1e-6


def test_smooth_route_against_gamma_oracle():
    # I ~ Gamma(k, theta): E[log(1 + I)] by direct quadrature
    k, th = 3.0, 0.5
    laplace_cf = lambda s: (1 + 1j * np.asarray(s) * th) ** (-k)  # noqa: E731
    g = Smooth(lambda x: np.log1p(x), lambda x: 1 / (1 + np.asarray(x)))
    val = expectation_via_transform(laplace_cf, g)
    oracle = integrate(lambda x: math.log1p(x) * x ** (k - 1) * math.exp(-x / th) / (math.gamma(k) * th**k), 0.0, math.inf)[0]
    assert val == pytest.approx(oracle, rel=1e-6)


def test_survival_from_laplace_exponential():
    t = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(survival_from_laplace(lambda p: 1 / (1 + p), t), np.exp(-t), atol=1e-7)


def test_moments_from_char_fn_gamma():
    k, th = 2.0, 1.5
    mom = moments_from_char_fn(lambda s: (1 + 1j * np.asarray(s) * th) ** (-k), 3)
    assert mom[1] == pytest.approx(k * th, rel=1e-9)
    assert mom[2] == pytest.approx(k * (k + 1) * th**2, rel=1e-9)
    assert mom[3] == pytest.approx(k * (k + 1) * (k + 2) * th**3, rel=1e-8)


def test_rejects_invalid_inputs():
    with pytest.raises(NotACharacteristicFunction):
        expectation_via_transform(lambda s: 2.0 + 0 * np.asarray(s), Polynomial((1.0,)))
    with pytest.raises(TypeError):
        expectation_via_transform(normal_char_fn(0, 1), lambda x: x)
