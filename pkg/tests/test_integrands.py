import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from bdvarmin.grid import frob_norm, sym_inner
from bdvarmin.integrands import (
    IntegrandError,
    PerturbedIntegrand,
    certify_mu_ellipticity,
    conjugate_by_search,
    ekeland,
    get_integrand,
    make_abs,
    make_area,
    make_phi_mu,
    make_quadratic,
    make_smooth_abs,
    nominal_ellipticity,
    phi_mu,
    recession_slope_phi,
    v_alpha,
    valpha_check,
    viscosity,
)

mus = st.sampled_from([1.2, 1.5, 2.0, 2.5, 3.0, 4.0])
sym = st.lists(st.floats(-50, 50), min_size=3, max_size=3).map(np.array)


def _double_integral(mu, r):
    """Oracle by nested adaptive quadrature, independent of the library's formulas."""
    inner = lambda s: integrate.quad(lambda t: (1 + t * t) ** (-mu / 2), 0, s, epsabs=1e-13)[0]
    return integrate.quad(inner, 0, r, epsabs=1e-12)[0]


def test_phi_mu_closed_form_values():
    assert phi_mu(3.0, 1.0) == pytest.approx(math.sqrt(2) - 1, abs=1e-14)
    assert phi_mu(2.0, 1.0) == pytest.approx(math.pi / 4 - math.log(2) / 2, abs=1e-14)
    for mu in (1.2, 2.0, 3.0, 5.0):
        assert phi_mu(mu, 0.0) == 0.0


def test_phi_mu_rejects_mu_at_most_one():
    for mu in (1.0, 0.5, -2.0):
        with pytest.raises(IntegrandError):
            phi_mu(mu, 1.0)
        with pytest.raises(IntegrandError):
            make_phi_mu(mu)


@pytest.mark.parametrize("mu", [1.2, 1.5, 2.5, 4.0])
@pytest.mark.parametrize("r", [0.3, 1.0, 7.0])
def test_phi_mu_quadrature_and_profile_agree_with_nested_oracle(mu, r):
    want = _double_integral(mu, r)
    assert phi_mu(mu, r) == pytest.approx(want, abs=1e-10)
    assert float(make_phi_mu(mu).g(np.asarray(r))) == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("mu", [1.2, 1.5, 2.0, 3.0, 4.5])
def test_recession_slope_against_improper_integral(mu):
    want = integrate.quad(lambda t: (1 + t * t) ** (-mu / 2), 0, np.inf, epsabs=1e-13, limit=500)[0]
    assert recession_slope_phi(mu) == pytest.approx(want, rel=1e-9)
    assert make_phi_mu(mu).c_inf == pytest.approx(want, rel=1e-9)


def test_recession_closed_forms():
    assert recession_slope_phi(3.0) == pytest.approx(1.0, abs=1e-12)
    assert recession_slope_phi(2.0) == pytest.approx(math.pi / 2, abs=1e-12)
    f = make_phi_mu(2.0)
    big = 1e8
    assert float(f.g(np.asarray(big))) / big == pytest.approx(math.pi / 2, rel=1e-6)


def _fd_grad(f, xi, h=1e-6):
    out = np.zeros(3)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out[k] = (f.value(xi + e) - f.value(xi - e)) / (2 * h)
    # dual pairing uses weight 2 on the off-diagonal slot
    return out / np.array([1.0, 2.0, 1.0])


@given(mus, sym)
def test_gradient_matches_finite_differences(mu, xi):
    xi = xi / 10
    f = make_phi_mu(mu)
    np.testing.assert_allclose(f.grad(xi), _fd_grad(f, xi), atol=1e-6)


@given(mus, sym, sym)
def test_hessian_form_matches_directional_second_difference(mu, b, a):
    b = b / 10
    f = make_phi_mu(mu)
    a = a / (1 + frob_norm(a))
    t = 1e-4
    fd = (f.value(b + t * a) - 2 * f.value(b) + f.value(b - t * a)) / t**2
    assert float(f.hess_form(b, a)) == pytest.approx(float(fd), abs=2e-4 * (1 + abs(float(fd))))


def _fenchel_young_gap(f, xi):
    eta = f.grad(xi)
    return f.value(xi) + f.conjugate_sym(eta) - sym_inner(eta, xi)


@pytest.mark.parametrize("f", [make_area(), make_phi_mu(2.0)], ids=["area", "phi2"])
def test_duality_relation_is_an_equality(f, rng):
    xi = rng.standard_normal((1000, 3)) * np.exp(rng.uniform(-4, 3, (1000, 1)))
    gap = _fenchel_young_gap(f, xi)
    assert np.max(np.abs(gap)) <= 1e-9


@pytest.mark.parametrize("f", [make_area(), make_phi_mu(2.0), make_phi_mu(1.5)], ids=["area", "phi2", "phi1.5"])
def test_fenchel_young_inequality(f, rng):
    xi = rng.standard_normal((2000, 3)) * 3
    eta = rng.standard_normal((2000, 3))
    eta *= (f.c_inf * rng.uniform(0, 0.999, 2000) / frob_norm(eta))[:, None]
    lhs = f.value(xi) + f.conjugate_sym(eta)
    assert np.all(lhs - sym_inner(eta, xi) >= -1e-12)


@pytest.mark.parametrize("mu", [1.2, 1.5, 2.5])
def test_conjugate_agrees_with_direct_search(mu):
    f = make_phi_mu(mu)
    for frac in (0.1, 0.5, 0.9):
        s = frac * f.c_inf
        assert f.conjugate(s) == pytest.approx(conjugate_by_search(f, s), abs=1e-8)


def test_conjugate_outside_ball_is_infinite_and_endpoint_values():
    f = make_phi_mu(3.0)
    assert f.conjugate(1.0 + 1e-9) == math.inf
    assert f.conjugate(1.0) == pytest.approx(1.0)
    assert make_phi_mu(4.0).conjugate(make_phi_mu(4.0).c_inf) == pytest.approx(0.5)
    assert make_phi_mu(1.5).conjugate(make_phi_mu(1.5).c_inf) == math.inf
    with pytest.raises(IntegrandError):
        f.conjugate(-0.1)


@pytest.mark.parametrize("f", [make_area(), make_phi_mu(1.2), make_phi_mu(2.0), make_smooth_abs(0.3)],
                         ids=["area", "phi1.2", "phi2", "smooth_abs"])
def test_linear_growth_bounds(f):
    gc = f.growth_constants()
    r = np.concatenate([[0.0], np.geomspace(1e-4, 1e6, 4000)])
    g = f.g(r)
    assert np.all(gc.c0 * r - gc.c2 <= g + 1e-10)
    assert np.all(g <= gc.c1 * (1 + r) + 1e-10)
    assert gc.c0 > 0


def test_recession_function_is_one_homogeneous(rng):
    f = make_phi_mu(1.5)
    xi = rng.standard_normal((50, 3))
    for t in (0.5, 2.0, 10.0):
        np.testing.assert_allclose(f.recession(t * xi), t * f.recession(xi), rtol=1e-13)
    assert np.all(make_quadratic().recession(xi) == np.inf)
    assert make_quadratic().recession(np.zeros(3)) == 0.0


def test_recession_is_the_limit_of_t_f_of_xi_over_t(rng):
    f = make_area()
    xi = rng.standard_normal((20, 3))
    t = 1e-7
    np.testing.assert_allclose(t * f.value(xi / t), f.recession(xi), rtol=1e-6)


def test_perturbations():
    f = make_phi_mu(1.5)
    xi = np.array([0.3, -0.2, 1.1])
    v = viscosity(f, 4).as_integrand()
    assert float(v.value(xi)) == pytest.approx(float(f.value(xi)) + frob_norm(xi) ** 2 / 8)
    assert math.isinf(v.c_inf)
    strain = np.ones((4, 4, 3))
    ek = ekeland(f, 2, strain, 0.25)
    a_k = 1 + 16 * (1 + 4.0) * 0.25
    assert ek.quad_weight == pytest.approx(1 / (8 * a_k))
    assert float(ek.value(xi)) == pytest.approx(float(f.value(xi)) + ek.quad_weight * (1 + frob_norm(xi) ** 2))
    with pytest.raises(IntegrandError):
        PerturbedIntegrand(f, 0.0)
    with pytest.raises(IntegrandError):
        PerturbedIntegrand(f, 1.0, "other")


def test_registry():
    assert get_integrand("phi_mu:1.5").mu == 1.5
    assert get_integrand("area").c_inf == 1.0
    assert get_integrand("abs").c_inf == 1.0
    assert math.isinf(get_integrand("quadratic").c_inf)
    for bad in ("phi_mu", "nothing", "area:2"):
        with pytest.raises(IntegrandError):
            get_integrand(bad)


@pytest.mark.parametrize("mu", [1.2, 1.5, 2.0, 3.0])
def test_ellipticity_certificate_matches_radial_scan(mu):
    f = make_phi_mu(mu)
    cert = certify_mu_ellipticity(f, mu, n_samples=4000)
    lo, up = nominal_ellipticity(f, mu)
    assert cert.passed
    assert cert.lam_hat >= lo * (1 - 1e-9)
    assert cert.Lam_hat <= up * (1 + 1e-9)


def test_wrong_exponent_is_not_certified():
    # phi_2 degenerates like (1+r^2)^(-1); claiming mu = 1.2 makes the lower ratio decay
    cert = certify_mu_ellipticity(make_phi_mu(2.0), 1.2, n_samples=4000)
    assert not cert.passed
    assert not certify_mu_ellipticity(make_abs(), 1.5, n_samples=200).passed


@given(st.floats(1.01, 1.99), st.integers(0, 10**6))
def test_valpha_lower_bound_property(alpha, seed):
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((200, 3)) * np.exp(rng.uniform(-6, 6, (200, 1)))
    eta = rng.standard_normal((200, 3))
    cert = valpha_check(xi, eta, alpha)
    assert cert.lower_margin >= -1e-12
    assert cert.pair_lower_margin >= -1e-12
    assert cert.pair_upper_margin >= 0


def test_valpha_rejects_alpha_outside_open_interval():
    for a in (1.0, 2.0, 0.5):
        with pytest.raises(IntegrandError):
            v_alpha(np.zeros(3), a)
