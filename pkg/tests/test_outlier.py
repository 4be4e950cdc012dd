import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdprob import geometry as geo
from spdprob import outlier as pot
from spdprob.distributions import IsotropicGaussian, iso_sample

from conftest import random_spd, ref_distance


@pytest.fixture(scope="module")
def cloud():
    return iso_sample(IsotropicGaussian(np.diag([2.0, 0.5]), 0.3), 500, seed=0)


def test_calibration_matches_scripted_recomputation(cloud):
    state = pot.potato_calibrate(cloud, z_th=2.5)
    ref = geo.frechet_mean(cloud)
    dist = [ref_distance(ref, x) for x in cloud]
    assert state.mu == pytest.approx(np.mean(dist), rel=1e-12)
    assert state.sigma == pytest.approx(np.std(dist), rel=1e-10)
    assert state.count == 500 and state.z_th == 2.5
    assert state.radius == pytest.approx(2.5 * state.sigma + state.mu)


def test_calibration_degenerate_dispersion():
    P, Q = np.eye(2), np.diag([np.e, 1 / np.e])
    with pytest.raises(ValueError, match="sigma = 0"):
        pot.potato_calibrate(np.stack([P, Q]))
    with pytest.raises(ValueError):
        pot.potato_calibrate(P[None])


def test_zscore_worked_values(cloud):
    s = pot.potato_calibrate(cloud)
    assert pot.potato_zscore(s, s.reference) == pytest.approx(-s.mu / s.sigma)
    R = geo.sqrtm(s.reference)
    at_mu = R @ geo.expm(np.diag([s.mu, 0.0])) @ R
    assert pot.potato_zscore(s, at_mu) == pytest.approx(0.0, abs=1e-12)
    radii = np.linspace(0, 3, 20)
    z = [pot.potato_zscore(s, R @ geo.expm(np.diag([r, -r]) / np.sqrt(2)) @ R) for r in radii]
    assert np.all(np.diff(z) > 0)


def test_boundary_decisions(cloud):
    s = pot.potato_calibrate(cloud, z_th=2.0)
    R = geo.sqrtm(s.reference)
    inside = R @ geo.expm(np.diag([s.radius - 1e-9, 0.0])) @ R
    outside = R @ geo.expm(np.diag([s.radius + 1e-9, 0.0])) @ R
    assert pot.potato_accept(s, inside)[0]
    assert not pot.potato_accept(s, outside)[0]


def test_decision_is_ball_membership_and_likelihood_level(cloud, rng):
    s = pot.potato_calibrate(cloud, z_th=1.5)
    X = random_spd(rng, 2, 1.2, n=1000)
    acc, _ = pot.potato_accept(s, X)
    dist = np.array([ref_distance(s.reference, x) for x in X])
    lik = np.exp(-dist**2 / (2 * s.sigma**2))
    # well away from the boundary the oracles are unaffected by rounding
    clear = np.abs(dist - s.radius) > 1e-9
    assert np.array_equal(acc[clear], (dist <= s.radius)[clear])
    assert np.array_equal(acc[clear], (lik >= pot.likelihood_threshold(s))[clear])
    assert 0 < acc.sum() < 1000


def test_equidistant_points_get_identical_decisions(cloud, rng):
    s = pot.potato_calibrate(cloud)
    R = geo.sqrtm(s.reference)
    for r in np.linspace(0.1, 2.0, 10):
        a = R @ geo.expm(np.diag([r, 0.0])) @ R
        b = R @ geo.expm(np.diag([0.0, -r])) @ R
        (acc_a, za), (acc_b, zb) = pot.potato_accept(s, a), pot.potato_accept(s, b)
        assert acc_a == acc_b and za == pytest.approx(zb, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_zscore_congruence_equivariance(seed):
    rng = np.random.default_rng(seed)
    X = random_spd(rng, 3, 0.6, n=30)
    Z = random_spd(rng, 3, n=10)
    A = rng.standard_normal((3, 3)) + 2 * np.eye(3)
    s1 = pot.potato_calibrate(X)
    s2 = pot.potato_calibrate(geo.congruence(X, A))
    np.testing.assert_allclose(pot.potato_zscore(s2, geo.congruence(Z, A)),
                               pot.potato_zscore(s1, Z), atol=1e-9)


def test_update_with_reference_is_fixed_point(cloud):
    s = pot.potato_calibrate(cloud)
    s2 = pot.potato_update(s, s.reference)
    np.testing.assert_allclose(s2.reference, s.reference, atol=1e-14)
    assert s2.count == s.count + 1


def test_rejected_point_leaves_state_unchanged(cloud):
    s = pot.potato_calibrate(cloud, z_th=1.0)
    far = s.reference * np.exp(5)
    assert pot.potato_update(s, far) is s


def test_repeated_point_is_approached_monotonically(cloud):
    s = pot.potato_calibrate(cloud, z_th=50.0)
    R = geo.sqrtm(s.reference)
    P = R @ geo.expm(np.diag([0.8, -0.3])) @ R
    dists = [geo.airm_distance(s.reference, P)]
    for _ in range(30):
        s = pot.potato_update(s, P)
        dists.append(geo.airm_distance(s.reference, P))
    assert np.all(np.diff(dists) < 0)


def test_streaming_equals_batch_statistics(cloud):
    s0 = pot.potato_calibrate(cloud[:200], z_th=2.0)
    stream = iso_sample(IsotropicGaussian(np.diag([2.0, 0.5]), 0.5), 300, seed=9)
    s, z, acc = pot.potato_stream(s0, stream)
    # batch recomputation over calibration distances plus accepted prefix
    dists = list(geo.airm_distance(s0.reference, cloud[:200]))
    ref = s0.reference
    for k, x in enumerate(stream):
        if acc[k]:
            dists.append(ref_distance(ref, x))
            ref = geo.geodesic(ref, x, 1.0 / len(dists))
    assert 0 < acc.sum() < len(stream)
    assert s.count == len(dists)
    assert s.mu == pytest.approx(np.mean(dists), abs=1e-9)
    assert s.sigma == pytest.approx(np.std(dists), abs=1e-9)
    np.testing.assert_allclose(s.reference, ref, atol=1e-9)
    assert np.array_equal(acc, z <= 2.0)
