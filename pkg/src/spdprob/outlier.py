"""Riemannian potato: a distance z-score gate around a running reference.

A point ``X`` is scored by ``z = (delta(X, ref) - mu) / sigma`` where ``mu``
and ``sigma`` are the mean and (biased) standard deviation of the distances
seen so far, and accepted when ``z <= z_th``.  Equivalently, ``X`` is
accepted when it lies in the closed geodesic ball of radius
``sigma * z_th + mu`` around the reference, which is a superlevel set of the
isotropic Gaussian likelihood ``exp(-delta^2 / (2 sigma^2))``.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import geometry as geo


@dataclass(frozen=True)
class PotatoState:
    """Reference point and running distance statistics.

    ``mu`` and ``sigma`` summarize the ``count`` distances accumulated so
    far (calibration distances plus one per accepted update).
    """

    reference: np.ndarray
    mu: float
    sigma: float
    count: int
    z_th: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("potato sigma must be positive")
        if self.count < 2:
            raise ValueError("potato needs at least two calibration samples")

    @property
    def radius(self):
        """Radius of the acceptance ball."""
        return self.sigma * self.z_th + self.mu


def potato_calibrate(samples, z_th=3.0, tol=1e-10):
    """Fit the reference (Fréchet mean) and the distance statistics.

    Raises
    ------
    ValueError
        With fewer than two samples, or when all distances to the reference
        coincide so that ``sigma = 0``.
    """
    X = geo.as_spd(samples, "samples")
    if X.ndim != 3 or len(X) < 2:
        raise ValueError("potato_calibrate needs at least two matrices")
    ref = geo.frechet_mean(X, tol=tol)
    dist = geo.airm_distance(ref, X)
    mu = float(np.mean(dist))
    sigma = float(np.sqrt(np.mean((dist - mu) ** 2)))
    if not sigma > 1e-12 * max(mu, 1.0):
        raise ValueError("all calibration distances are equal (sigma = 0)")
    return PotatoState(ref, mu, sigma, len(X), float(z_th))


def potato_zscore(state, X):
    """Distance z-score of ``X`` (one matrix or a stack)."""
    return (geo.airm_distance(state.reference, X) - state.mu) / state.sigma


def potato_accept(state, X):
    """Return ``(accepted, z)`` with ``accepted = z <= z_th``."""
    z = potato_zscore(state, X)
    return z <= state.z_th, z


def likelihood_threshold(state):
    """Likelihood level whose superlevel set is the acceptance region.

    The likelihood is the unnormalized isotropic Gaussian
    ``exp(-delta^2 / (2 sigma^2))`` around the reference.  Only meaningful
    when the acceptance radius is non-negative.
    """
    return float(np.exp(-state.radius**2 / (2 * state.sigma**2)))


def potato_update(state, X):
    """Fold an accepted point into the state.

    The reference moves a fraction ``1 / (count + 1)`` along the geodesic
    towards ``X``; the distance ``delta(X, old reference)`` enters the
    running mean and variance (Welford).  Rejected points leave the state
    unchanged.
    """
    accepted, _ = potato_accept(state, X)
    if not accepted:
        return state
    dist = float(geo.airm_distance(state.reference, X))
    n = state.count + 1
    m2 = state.sigma**2 * state.count
    delta = dist - state.mu
    mu = state.mu + delta / n
    m2 += delta * (dist - mu)
    ref = geo.geodesic(state.reference, X, 1.0 / n)
    return replace(state, reference=ref, mu=mu, sigma=float(np.sqrt(m2 / n)), count=n)


def potato_stream(state, samples):
    """Score a sequence of matrices, updating on every accepted one.

    Returns the final state and arrays ``z`` and ``accepted`` (each scored
    against the state current at its arrival).
    """
    X = geo.as_spd(samples, "samples")
    zs, acc = [], []
    for x in X:
        ok, z = potato_accept(state, x)
        zs.append(float(z))
        acc.append(bool(ok))
        if ok:
            state = potato_update(state, x)
    return state, np.array(zs), np.array(acc, dtype=bool)
