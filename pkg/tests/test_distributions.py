import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg, stats

from spdprob import distributions as D
from spdprob import geometry as geo
from spdprob.errors import ConvergenceError, DimensionError, NumericalError

from conftest import (
    entry_space_mass,
    fd_jacobian_det,
    random_spd,
    random_sym,
    zeta_closed_form_d2,
)


@pytest.fixture(scope="module")
def table2():
    return D.build_zeta_table(2, seed=0)


@pytest.fixture(scope="module")
def table3():
    return D.build_zeta_table(3, seed=0)


# -- Jacobian -----------------------------------------------------------------

def test_jacobian_matches_finite_differences(rng):
    for _ in range(15):
        d = int(rng.integers(2, 5))
        P = random_spd(rng, d)
        R = linalg.sqrtm(P).real
        V = R @ random_sym(rng, d, 0.8) @ R
        assert D.jacobian_det(P, V) == pytest.approx(fd_jacobian_det(P, V), rel=1e-4)


def test_jacobian_at_zero_is_exactly_one(rng):
    P = random_spd(rng, 4)
    assert D.jacobian_det(P, np.zeros((4, 4))) == 1.0
    assert D.jacobian_det(np.eye(1), np.array([[3.0]])) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.floats(0.01, 5.0))
def test_jacobian_at_least_one_and_affine_invariant(seed, d, scale):
    rng = np.random.default_rng(seed)
    P = random_spd(rng, d)
    V = random_sym(rng, d, scale)
    J = D.jacobian_det(np.eye(d), V)
    assert J >= 1.0
    R = linalg.sqrtm(P).real
    assert D.log_jacobian_det(P, R @ V @ R) == pytest.approx(np.log(J), rel=1e-9, abs=1e-12)


def test_log_sinhc_branches_agree():
    x = [1e-6, 9.99e-3, 1.001e-2, 0.5, 30.0, 800.0]
    with mpmath.workdps(50):
        ref = [float(mpmath.log(mpmath.sinh(mpmath.mpf(v)) / v)) for v in x]
    np.testing.assert_allclose(D.log_sinhc(np.array(x)), ref, rtol=1e-13)


# -- normalization table -------------------------------------------------------

def test_zeta_matches_closed_form_d2(table2):
    for s in (0.05, 0.3, 0.5, 1.0, 1.4):
        assert table2.log_zeta(s) == pytest.approx(np.log(zeta_closed_form_d2(s)), abs=3e-3)


def test_zeta_small_sigma_limit(table2, table3):
    for t in (table2, table3):
        m = geo.coords_dim(t.dim)
        flat = 0.5 * m * np.log(2 * np.pi * 0.01**2)
        assert abs(t.log_zeta(0.01) - flat) <= 0.01 * abs(flat)


def test_zeta_is_increasing_and_replicable(table2):
    assert np.all(np.diff(table2.log_zeta_values) > 0)
    other = D.build_zeta_table(2, [0.3, 0.4, 0.5, 0.6], seed=99)
    se = np.hypot(table2.stderr[np.argmin(abs(table2.sigma_grid - 0.5))], other.stderr[2])
    # the tail term covers the spline interpolation of the first table
    assert abs(other.log_zeta_values[2] - table2.log_zeta(0.5)) <= 3 * se + 1e-5


def test_zeta_table_is_deterministic_and_roundtrips(tmp_path):
    a = D.build_zeta_table(2, [0.1, 0.2, 0.4, 0.8], seed=5)
    b = D.build_zeta_table(2, [0.1, 0.2, 0.4, 0.8], seed=5)
    np.testing.assert_array_equal(a.log_zeta_values, b.log_zeta_values)
    a.save(tmp_path / "z.json")
    c = D.ZetaTable.load(tmp_path / "z.json")
    np.testing.assert_array_equal(c.log_zeta_values, a.log_zeta_values)
    np.testing.assert_array_equal(c.sigma_grid, a.sigma_grid)
    assert (c.mc_samples, c.seed, c.dim) == (a.mc_samples, 5, 2)


def test_zeta_table_validation():
    with pytest.raises(ValueError):
        D.build_zeta_table(2, [0.1, 0.2, 0.3, 0.4], mc_samples=10)
    with pytest.raises(ValueError):
        D.build_zeta_table(2, [0.2, 0.1, 0.3, 0.4])
    with pytest.raises(NumericalError, match="increase mc_samples"):
        D.build_zeta_table(8, [0.5, 1.0, 2.0, 3.0], mc_samples=100_000)


def test_mle_lhs_matches_closed_form_derivative(table2):
    h = 1e-5
    for s in (0.2, 0.6, 1.0):
        dz = (np.log(zeta_closed_form_d2(s + h)) - np.log(zeta_closed_form_d2(s - h))) / (2 * h)
        assert table2.mle_lhs(s) == pytest.approx(s**3 * dz, rel=5e-3)


# -- isotropic Gaussian ----------------------------------------------------------

def test_iso_density_values(table2, rng):
    P = random_spd(rng, 2)
    G = D.IsotropicGaussian(P, 0.5)
    assert D.iso_log_density(G, P, table2) == pytest.approx(-table2.log_zeta(0.5))
    # equidistant points get equal density
    V = random_sym(rng, 2)
    R = linalg.sqrtm(P).real
    X1 = geo.exp_map(P, R @ V @ R)
    X2 = geo.exp_map(P, -R @ V @ R)
    assert D.iso_log_density(G, X1, table2) == pytest.approx(D.iso_log_density(G, X2, table2))


def test_iso_density_normalizes(table2, rng):
    P0 = random_spd(rng, 2, 0.5)
    G = D.IsotropicGaussian(P0, 0.5)
    mass, se = entry_space_mass(lambda X: D.iso_log_density(G, X, table2), P0, seed=3)
    assert abs(mass - 1) < 0.02 and se < 0.01


def test_iso_density_errors(table2):
    with pytest.raises(ValueError, match="extend the table"):
        D.iso_log_density(D.IsotropicGaussian(np.eye(2), 5.0), np.eye(2), table2)
    with pytest.raises(DimensionError):
        D.iso_log_density(D.IsotropicGaussian(np.eye(3), 0.5), np.eye(3), table2)
    with pytest.raises(ValueError):
        D.IsotropicGaussian(np.eye(2), 0.0)


def test_iso_sample_center_and_moment_identity(table2):
    X0 = np.array([[2.0, 0.3], [0.3, 0.5]])
    G = D.IsotropicGaussian(X0, 0.3)
    X = D.iso_sample(G, 2000, seed=1)
    assert X.shape == (2000, 2, 2)
    assert geo.airm_distance(geo.frechet_mean(X), X0) <= 0.05
    s2 = np.mean(geo.airm_distance(X0, X) ** 2)
    assert s2 == pytest.approx(table2.mle_lhs(0.3), rel=0.05)


def test_iso_sample_moment_identity_large_sigma(table2):
    G = D.IsotropicGaussian(np.eye(2), 1.2)
    X = D.iso_sample(G, 20000, seed=2)
    s2 = np.mean(geo.airm_distance(np.eye(2), X) ** 2)
    assert s2 == pytest.approx(table2.mle_lhs(1.2), rel=0.05)


def test_iso_sample_radius_matches_target_law():
    # in d=2 the radial law of the whitened log is known in closed form, so the
    # sampler can be checked with a Kolmogorov-Smirnov test against quadrature
    sigma = 0.7
    X = D.iso_sample(D.IsotropicGaussian(np.eye(2), sigma), 4000, seed=4)
    r = geo.airm_distance(np.eye(2), X)
    # density of (trace part t, gap g) after integrating the angle:
    # exp(-(t^2 + g^2)/2s^2) * g * sinh(g/sqrt2)/(g/sqrt2); radius r^2 = t^2 + g^2
    grid = np.linspace(0, 8 * sigma, 4001)
    phi = np.linspace(0, np.pi / 2, 801)
    G, F = np.meshgrid(grid, phi, indexing="ij")
    g = G * np.sin(F)
    sh = np.where(g > 0, np.sinh(g / np.sqrt(2)) / np.maximum(g / np.sqrt(2), 1e-300), 1.0)
    dens = np.trapezoid(np.exp(-G**2 / (2 * sigma**2)) * G * g * sh, phi, axis=1)
    cdf = np.concatenate([[0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(grid))])
    cdf /= cdf[-1]
    p = stats.kstest(r, lambda x: np.interp(x, grid, cdf)).pvalue
    assert p > 0.01


def test_iso_sample_is_rotation_invariant():
    # for 2x2 matrices the angle of the traceless part of the whitened log is
    # uniform under an isotropic law (conjugation by a rotation shifts it)
    X = D.iso_sample(D.IsotropicGaussian(np.eye(2), 0.6), 3000, seed=5)
    L = geo.logm(X)
    theta = np.arctan2(2 * L[:, 0, 1], L[:, 0, 0] - L[:, 1, 1])
    counts = np.histogram(theta, bins=12, range=(-np.pi, np.pi))[0]
    assert stats.chisquare(counts).pvalue > 0.01


def test_iso_sample_is_deterministic():
    G = D.IsotropicGaussian(np.eye(3), 0.4)
    np.testing.assert_array_equal(D.iso_sample(G, 10, seed=3), D.iso_sample(G, 10, seed=3))


def test_iso_fit_recovers_sigma(table2):
    X0 = np.array([[1.0, 0.2], [0.2, 3.0]])
    X = D.iso_sample(D.IsotropicGaussian(X0, 0.4), 1000, seed=11)
    fit = D.iso_fit(X, table2)
    assert 0.36 <= fit.sigma <= 0.44
    np.testing.assert_array_equal(fit.center, geo.frechet_mean(X))
    s2 = np.mean(geo.airm_distance(fit.center, X) ** 2)
    assert abs(table2.mle_lhs(fit.sigma) - s2) <= 1e-8 * s2


def test_iso_fit_degenerate_and_out_of_range(table2):
    X = np.repeat(np.eye(2)[None] * 3, 5, axis=0)
    with pytest.warns(UserWarning):
        fit = D.iso_fit(X, table2)
    assert fit.degenerate and fit.sigma == table2.sigma_range[0]
    wide = D.iso_sample(D.IsotropicGaussian(np.eye(2), 1.0), 200, seed=0)
    wide = geo.exp_coords(np.eye(2), 2.5 * geo.log_coords(np.eye(2), wide))
    with pytest.raises(ValueError, match="dispersion"):
        D.iso_fit(wide, table2)


# -- wrapped Gaussian -------------------------------------------------------------

def _wg(rng, d=2, scale=0.3):
    m = geo.coords_dim(d)
    A = rng.standard_normal((m, m)) * scale
    return D.WrappedGaussian(random_spd(rng, d, 0.5), rng.standard_normal(m) * 0.2,
                             A @ A.T + 0.02 * np.eye(m))


def test_wg_density_normalizes(rng):
    W = _wg(rng)
    mass, se = entry_space_mass(lambda X: D.wg_log_density(W, X), W.base, seed=7)
    assert abs(mass - 1) < 0.02 and se < 0.01


def test_wg_density_without_jacobian_does_not_normalize(rng):
    W = D.WrappedGaussian(np.eye(2), np.zeros(3), np.eye(3) * 0.5)
    mass, _ = entry_space_mass(lambda X: D.wg_log_density(W, X, include_jacobian=False),
                               W.base, seed=7)
    assert mass > 1.03


def test_wg_sample_degenerate_concentration(rng):
    P = random_spd(rng, 3)
    W = D.WrappedGaussian(P, np.zeros(6), 1e-12 * np.eye(6))
    X = D.wg_sample(W, 50, seed=0)
    assert np.max(geo.airm_distance(P, X)) <= 1e-5


def test_wg_sample_coordinates_are_gaussian(rng):
    W = _wg(rng, d=3)
    X = D.wg_sample(W, 20000, seed=1)
    C = geo.log_coords(W.base, X)
    np.testing.assert_allclose(C.mean(axis=0), W.mu, atol=0.02)
    np.testing.assert_allclose(np.cov(C.T), W.cov, atol=0.03)
    np.testing.assert_array_equal(X[:5], D.wg_sample(W, 5, seed=1))


def test_wg_fit_moments_recovers_cov(rng):
    d, m = 3, 6
    A = rng.standard_normal((m, m)) * 0.2
    W = D.WrappedGaussian(random_spd(rng, d), np.zeros(m), A @ A.T + 0.01 * np.eye(m))
    X = D.wg_sample(W, 5000, seed=2)
    fit = D.wg_fit_moments(X, W.base)
    assert np.linalg.norm(fit.cov - W.cov) <= 0.1 * np.linalg.norm(W.cov)
    assert np.all(fit.mu == 0)


def test_wg_fit_moments_rank_deficiency_and_shrinkage():
    X = np.repeat(np.eye(2)[None], 4, axis=0)
    with pytest.raises(NumericalError, match="shrinkage"):
        D.wg_fit_moments(X, np.eye(2))
    fit = D.wg_fit_moments(X, np.eye(2), shrinkage=1e-3)
    np.testing.assert_allclose(fit.cov, 1e-3 * np.eye(3))


def test_wg_fit_mle_improves_on_moments(rng):
    W = _wg(rng, d=2, scale=0.4)
    X = D.wg_sample(W, 400, seed=3)
    mom = D.wg_fit_moments(X, geo.frechet_mean(X))
    mle, trace = D.wg_fit_mle(X, return_trace=True)
    ll_mom = np.mean(D.wg_log_density(mom, X))
    ll_mle = np.mean(D.wg_log_density(mle, X))
    assert ll_mle >= ll_mom - 1e-12
    assert np.all(np.diff(trace) >= 0)
    # the location point is what the likelihood pins down
    loc = geo.exp_coords(mle.base, mle.mu)
    assert geo.airm_distance(loc, geo.exp_coords(W.base, W.mu)) < 0.1


def test_wg_fit_mle_recovers_location_point():
    # a shift of the base can absorb mu, so the identified quantity is the
    # location point Exp_P(mu); the base alone lands about 0.1 to 0.13 away
    P0 = np.array([[1.5, 0.3], [0.3, 0.7]])
    A = np.random.default_rng(1).standard_normal((3, 3)) * 0.3
    for mu in (np.zeros(3), np.array([0.3, -0.2, 0.1])):
        W = D.WrappedGaussian(P0, mu, A @ A.T + 0.05 * np.eye(3))
        fit = D.wg_fit_mle(D.wg_sample(W, 3000, seed=2))
        loc = geo.exp_coords(fit.base, fit.mu)
        assert geo.airm_distance(loc, geo.exp_coords(P0, mu)) <= 0.1


def test_wg_fit_mle_needs_enough_samples(rng):
    with pytest.raises(ValueError):
        D.wg_fit_mle(random_spd(rng, 3, n=5))


def test_wg_validation():
    with pytest.raises(DimensionError):
        D.WrappedGaussian(np.eye(2), np.zeros(2), np.eye(3))
    with pytest.raises(Exception):
        D.WrappedGaussian(np.eye(2), np.zeros(3), -np.eye(3))
    with pytest.raises(NumericalError):
        D.gaussian_logpdf(np.zeros(2), np.zeros(2), np.diag([1.0, 1e-20]))
