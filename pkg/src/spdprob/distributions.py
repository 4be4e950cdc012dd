"""Gaussian distributions on the SPD manifold.

Two families are provided:

* the isotropic Riemannian Gaussian ``G(center, sigma**2)`` with density
  ``exp(-delta(X, center)**2 / (2 sigma**2)) / zeta(sigma)`` with respect to
  the Riemannian volume, and
* the wrapped Gaussian ``WG(base; mu, cov)``, the push-forward of
  ``N(mu, cov)`` in normal coordinates at ``base`` through ``Exp_base``.

The normalization ``zeta(sigma)`` is tabulated by Monte Carlo in a
:class:`ZetaTable` and interpolated with a cubic spline in ``log(sigma)``.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, stats
from scipy.interpolate import CubicSpline

from . import geometry as geo
from .errors import ConvergenceError, DimensionError, NumericalError

ZETA_TABLE_VERSION = 1


# -- Jacobian of the exponential map --------------------------------------


def log_sinhc(x):
    """``log(sinh(x) / x)``, accurate for small and large ``|x|``."""
    x = np.abs(np.asarray(x, float))
    out = np.empty_like(x)
    small = x < 1.0
    # sinh(x)/x - 1 = sum_k x^2k / (2k+1)!, Horner form, then log1p
    x2 = x[small] ** 2
    y = np.zeros_like(x2)
    for k in range(12, 0, -1):
        y = x2 / ((2 * k) * (2 * k + 1)) * (1.0 + y)
    out[small] = np.log1p(y)
    xl = x[~small]
    out[~small] = xl + np.log1p(-np.exp(-2.0 * xl)) - np.log(2.0 * xl)
    return out


def _half_gaps(eigs):
    d = eigs.shape[-1]
    i, j = np.triu_indices(d, 1)
    return 0.5 * (eigs[..., i] - eigs[..., j])


def log_jacobian_from_eigs(eigs):
    """Log-Jacobian of ``Exp_I`` at a symmetric matrix with eigenvalues ``eigs``.

    Uses ``J = prod_{i<j} sinh(x_ij) / x_ij`` with ``x_ij = (l_i - l_j) / 2``.
    """
    eigs = np.asarray(eigs, float)
    return np.sum(log_sinhc(_half_gaps(eigs)), axis=-1)


def log_jacobian_det(P, V):
    """Log of the Jacobian determinant of ``Exp_P`` at the tangent vector ``V``.

    The determinant is taken between orthonormal bases of the tangent spaces
    at ``P`` and at ``Exp_P(V)``, so by affine invariance it only depends on
    the eigenvalues of ``P^-1/2 V P^-1/2``.
    """
    P, V = np.asarray(P, float), np.asarray(V, float)
    Pi = geo.invsqrtm(P)
    eigs = np.linalg.eigvalsh(geo._sym(Pi @ V @ Pi))
    out = log_jacobian_from_eigs(eigs)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite Jacobian determinant")
    return out[()] if np.ndim(out) == 0 else out


def jacobian_det(P, V):
    """Jacobian determinant ``det(dExp_P(V))``; always ``>= 1``."""
    out = np.exp(log_jacobian_det(P, V))
    if not np.all(np.isfinite(out)):
        raise NumericalError("Jacobian determinant overflows; use log_jacobian_det")
    return out


# -- normalization table ----------------------------------------------------


def default_sigma_grid(lo=0.01, hi=1.5, n=64):
    """Log-spaced grid of spreads used when none is supplied."""
    return np.geomspace(lo, hi, n)


@dataclass(frozen=True)
class ZetaTable:
    """Tabulated ``log zeta(sigma)`` for one matrix size ``dim``.

    Build it with :func:`build_zeta_table`; evaluate with :meth:`log_zeta`
    and :meth:`dlog_zeta`, both of which interpolate with a cubic spline in
    ``log(sigma)``.
    """

    dim: int
    sigma_grid: np.ndarray
    log_zeta_values: np.ndarray
    stderr: np.ndarray
    mc_samples: int
    seed: int
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.asarray(self.sigma_grid, float)
        vals = np.asarray(self.log_zeta_values, float)
        if grid.ndim != 1 or grid.shape != vals.shape or len(grid) < 4:
            raise ValueError("sigma_grid and log_zeta_values need matching length >= 4")
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("sigma_grid must be positive and strictly increasing")
        if np.any(np.diff(vals) <= 0):
            raise NumericalError("log zeta is not strictly increasing on the grid")
        object.__setattr__(self, "sigma_grid", grid)
        object.__setattr__(self, "log_zeta_values", vals)
        object.__setattr__(self, "stderr", np.asarray(self.stderr, float))
        object.__setattr__(self, "_spline", CubicSpline(np.log(grid), vals))

    @property
    def sigma_range(self):
        return float(self.sigma_grid[0]), float(self.sigma_grid[-1])

    def covers(self, sigma):
        lo, hi = self.sigma_range
        return lo <= sigma <= hi

    def _check(self, sigma):
        s = np.asarray(sigma, float)
        lo, hi = self.sigma_range
        if np.any(s < lo) or np.any(s > hi):
            raise ValueError(
                f"sigma={sigma} outside the table range [{lo:g}, {hi:g}]; "
                "rebuild the table with a wider sigma_grid"
            )
        return s

    def log_zeta(self, sigma):
        s = self._check(sigma)
        return self._spline(np.log(s))[()]

    def dlog_zeta(self, sigma):
        """Derivative of ``log zeta`` with respect to ``sigma``."""
        s = self._check(sigma)
        return (self._spline(np.log(s), 1) / s)[()]

    def mle_lhs(self, sigma):
        """``sigma**3 * d/dsigma log zeta(sigma)``, the expected squared distance."""
        s = self._check(sigma)
        return s**3 * self.dlog_zeta(s)

    def to_dict(self):
        return {
            "version": ZETA_TABLE_VERSION,
            "dim": int(self.dim),
            "grid": self.sigma_grid.tolist(),
            "log_zeta": self.log_zeta_values.tolist(),
            "stderr": self.stderr.tolist(),
            "mc_samples": int(self.mc_samples),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("version") != ZETA_TABLE_VERSION:
            raise ValueError(f"unsupported zeta table version {data.get('version')!r}")
        return cls(
            dim=int(data["dim"]),
            sigma_grid=np.asarray(data["grid"], float),
            log_zeta_values=np.asarray(data["log_zeta"], float),
            stderr=np.asarray(data["stderr"], float),
            mc_samples=int(data["mc_samples"]),
            seed=int(data["seed"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _radius_stratified_normals(m, n, n_strata, seed, chunk=50_000):
    """Standard normal vectors in R^m with the radius stratified by quantile.

    Sample ``i`` falls in radial stratum ``i % n_strata``.  Chunks draw from
    independent child seeds so the output does not depend on how the work
    is split.
    """
    n_chunks = -(-n // chunk)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    strata = np.arange(n) % n_strata
    out = np.empty((n, m))
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        sl = slice(k * chunk, min(n, (k + 1) * chunk))
        size = sl.stop - sl.start
        u = (strata[sl] + rng.random(size)) / n_strata
        r = np.sqrt(stats.chi2.ppf(u, m))
        direction = rng.standard_normal((size, m))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        out[sl] = r[:, None] * direction
    return out, strata


def build_zeta_table(d, sigma_grid=None, mc_samples=200_000, seed=0, n_strata=64,
                     max_rel_stderr=0.01):
    """Estimate ``log zeta(sigma)`` on a grid by stratified Monte Carlo.

    Uses ``zeta(sigma) = (2 pi sigma^2)^(m/2) E[J_I(V)]`` with
    ``V ~ N(0, sigma^2 I_m)`` in normal coordinates at the identity.  The same
    standard-normal draws are rescaled for every ``sigma``, so the table is a
    smooth, strictly increasing function of ``sigma`` and its spline
    derivative is well behaved.

    Parameters
    ----------
    d : int
        Matrix size.
    sigma_grid : array_like, optional
        Positive increasing spreads; :func:`default_sigma_grid` if omitted.
    mc_samples : int
        Number of Monte Carlo draws, at least ``1e5``.
    seed : int
        Seed of the draws.
    n_strata : int
        Number of equal-probability radial strata.
    max_rel_stderr : float
        Largest tolerated relative standard error of ``zeta``.

    Returns
    -------
    ZetaTable

    Raises
    ------
    NumericalError
        If the relative standard error exceeds ``max_rel_stderr`` somewhere.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if mc_samples < 100_000:
        raise ValueError("mc_samples must be at least 1e5")
    grid = default_sigma_grid() if sigma_grid is None else np.asarray(sigma_grid, float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("sigma_grid must be positive and strictly increasing")
    m = geo.coords_dim(d)
    Z, strata = _radius_stratified_normals(m, mc_samples, n_strata, seed)
    gaps = _half_gaps(np.linalg.eigvalsh(geo.vec_to_sym(Z)))
    counts = np.bincount(strata, minlength=n_strata).astype(float)

    log_zeta = np.empty(len(grid))
    rel_err = np.empty(len(grid))
    for k, sigma in enumerate(grid):
        logj = np.sum(log_sinhc(sigma * gaps), axis=1)
        shift = logj.max()
        e = np.exp(logj - shift)
        s1 = np.bincount(strata, weights=e, minlength=n_strata)
        s2 = np.bincount(strata, weights=e * e, minlength=n_strata)
        means = s1 / counts
        var = np.maximum(s2 / counts - means**2, 0.0) * counts / np.maximum(counts - 1, 1)
        est = means.mean()
        se = np.sqrt(np.sum(var / counts)) / n_strata
        log_zeta[k] = 0.5 * m * np.log(2 * np.pi * sigma**2) + shift + np.log(est)
        rel_err[k] = se / est
    if np.any(rel_err > max_rel_stderr):
        worst = int(np.argmax(rel_err))
        raise NumericalError(
            f"relative MC standard error {rel_err[worst]:.3%} at sigma={grid[worst]:g} "
            f"exceeds {max_rel_stderr:.0%}; increase mc_samples or shrink the grid"
        )
    if d >= 6 and grid[-1] > 1.0:
        warnings.warn(
            "zeta table accuracy is not validated for d >= 6 at sigma > 1", stacklevel=2
        )
    return ZetaTable(d, grid, log_zeta, rel_err, int(mc_samples), int(seed))


# -- isotropic Gaussian -----------------------------------------------------


@dataclass(frozen=True)
class IsotropicGaussian:
    """Isotropic Riemannian Gaussian with ``center`` and spread ``sigma``.

    ``degenerate`` is set by :func:`iso_fit` when the sample dispersion is
    below what the table can resolve and ``sigma`` was clipped to the lower
    end of the grid.
    """

    center: np.ndarray
    sigma: float
    degenerate: bool = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "center", geo.as_spd(self.center, "center"))
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def dim(self):
        return self.center.shape[0]


def iso_log_density(G, X, table):
    """Log-density of ``G`` at ``X`` (single matrix or stack).

    Returns ``-delta(X, center)**2 / (2 sigma**2) - log zeta(sigma)``.
    """
    if table.dim != G.dim:
        raise DimensionError(f"table is for d={table.dim}, distribution has d={G.dim}")
    if not table.covers(G.sigma):
        lo, hi = table.sigma_range
        raise ValueError(
            f"sigma={G.sigma:g} outside table range [{lo:g}, {hi:g}]; extend the table"
        )
    dist = geo.airm_distance(G.center, X)
    return -(dist**2) / (2 * G.sigma**2) - table.log_zeta(G.sigma)


def _iso_envelope(d, sigma):
    """Proposal inflation ``c`` and log envelope constant for rejection sampling.

    The target in normal coordinates is ``exp(-r^2 / 2 s^2) J(v)`` with
    ``r = |v|``.  With ``log J <= min(a r, d r^2 / 8)`` the ratio to the
    proposal ``exp(-r^2 / 2 (s c)^2)`` is bounded by ``exp(log_m)``.
    """
    npairs = d * (d - 1) // 2
    if npairs == 0:
        return 1.0, 0.0
    m = geo.coords_dim(d)
    a = 0.5 * np.sqrt(npairs * d)
    q = d / 8.0

    def log_bound(c):
        b = (1.0 - 1.0 / c**2) / (2.0 * sigma**2)
        r0 = a / q
        inner = max(0.0, (q - b) * r0**2)
        rstar = a / (2.0 * b)
        outer = a**2 / (4.0 * b) if rstar >= r0 else -b * r0**2 + a * r0
        return max(inner, outer)

    cs = 1.0 + np.geomspace(1e-4, 20.0, 2000)
    cost = [m * np.log(c) + log_bound(c) for c in cs]
    k = int(np.argmin(cost))
    return float(cs[k]), float(log_bound(cs[k]))


def iso_sample(G, n, seed=0, batch=None):
    """Exact samples of ``G`` by rejection sampling in normal coordinates.

    Proposals ``v ~ N(0, (sigma c)^2 I_m)`` are accepted with probability
    ``exp(-|v|^2 (1 - 1/c^2) / 2 sigma^2) J(v) / M`` and mapped through
    ``Exp_center``.

    Returns
    -------
    ndarray, shape (n, d, d)

    Raises
    ------
    NumericalError
        If the acceptance rate falls below ``1e-4``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    d = G.dim
    m = geo.coords_dim(d)
    c, log_m = _iso_envelope(d, G.sigma)
    rng = np.random.default_rng(seed)
    batch = batch or max(4 * n, 1000)
    b = (1.0 - 1.0 / c**2) / (2.0 * G.sigma**2)
    accepted = []
    n_acc = n_prop = 0
    while n_acc < n:
        v = rng.standard_normal((batch, m)) * (G.sigma * c)
        u = rng.random(batch)
        r2 = np.sum(v * v, axis=1)
        logj = log_jacobian_from_eigs(np.linalg.eigvalsh(geo.vec_to_sym(v)))
        keep = np.log(u) < -b * r2 + logj - log_m
        accepted.append(v[keep])
        n_acc += int(keep.sum())
        n_prop += batch
        if n_prop >= 100_000 and n_acc / n_prop < 1e-4:
            raise NumericalError(
                f"rejection sampler acceptance rate {n_acc / n_prop:.2e} below 1e-4 "
                f"(d={d}, sigma={G.sigma:g})"
            )
    V = np.concatenate(accepted)[:n]
    return geo.exp_coords(G.center, V)


def iso_fit(samples, table, tol=1e-10):
    """Maximum-likelihood isotropic Gaussian.

    The center is the Fréchet mean; ``sigma`` solves
    ``sigma**3 d/dsigma log zeta(sigma) = mean squared distance to the center``
    by root bracketing on the table's spline.

    Raises
    ------
    ValueError
        If the dispersion exceeds what the table range can explain.
    """
    X = geo.as_spd(samples, "samples")
    if X.ndim != 3 or len(X) < 2:
        raise ValueError("iso_fit needs a stack of at least two matrices")
    if table.dim != X.shape[-1]:
        raise DimensionError(f"table is for d={table.dim}, samples have d={X.shape[-1]}")
    center = geo.frechet_mean(X, tol=tol)
    s2 = float(np.mean(geo.airm_distance(center, X) ** 2))
    lo, hi = table.sigma_range

    def f(s):
        return table.mle_lhs(s) - s2

    if f(lo) >= 0:
        warnings.warn(
            f"sample dispersion {s2:.3e} below table resolution; sigma clipped to {lo:g}",
            stacklevel=2,
        )
        return IsotropicGaussian(center, lo, degenerate=True)
    if f(hi) < 0:
        raise ValueError(
            f"empirical dispersion {s2:.6g} exceeds the table range "
            f"(max {table.mle_lhs(hi):.6g} at sigma={hi:g}); extend the table"
        )
    sigma = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(sigma)) > 1e-8 * max(s2, 1e-300):
        raise ConvergenceError("sigma equation residual too large", last=sigma,
                               residual=abs(f(sigma)))
    return IsotropicGaussian(center, sigma)


# -- wrapped Gaussian -------------------------------------------------------


@dataclass(frozen=True)
class WrappedGaussian:
    """Wrapped Gaussian ``WG(base; mu, cov)`` in normal coordinates at ``base``."""

    base: np.ndarray
    mu: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        base = geo.as_spd(self.base, "base")
        m = geo.coords_dim(base.shape[0])
        mu = np.asarray(self.mu, float).reshape(-1)
        cov = geo.as_spd(self.cov, "cov")
        if mu.shape != (m,) or cov.shape != (m, m):
            raise DimensionError(f"mu and cov must have length {m} for d={base.shape[0]}")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mu must be finite")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self):
        return self.base.shape[0]


def wg_sample(W, n, seed=0):
    """Draw ``Exp_base(t)`` with ``t ~ N(mu, cov)``; shape ``(n, d, d)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(W.cov)
    t = W.mu + rng.standard_normal((n, len(W.mu))) @ L.T
    return geo.exp_coords(W.base, t)


def _coords_and_logjac(P, X):
    Pi = geo.invsqrtm(P)
    w, U = np.linalg.eigh(geo._sym(Pi @ X @ Pi))
    lw = np.log(np.maximum(w, geo._EIG_FLOOR))
    L = (U * lw[..., None, :]) @ geo._swap(U)
    return geo.sym_to_vec(L), log_jacobian_from_eigs(lw)


def gaussian_logpdf(c, mu, cov):
    """Multivariate normal log-density evaluated row-wise on ``c``."""
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is numerically singular") from exc
    w = np.linalg.eigvalsh(cov)
    if w[0] <= 1e-14 * w[-1]:
        raise NumericalError(f"covariance is numerically singular (condition {w[-1] / w[0]:.2e})")
    c = np.asarray(c, float)
    m = len(mu)
    z = linalg.solve_triangular(L, (c.reshape(-1, m) - mu).T, lower=True)
    maha = np.sum(z * z, axis=0).reshape(c.shape[:-1])
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (m * np.log(2 * np.pi) + logdet + maha)


def wg_log_density(W, X, include_jacobian=True):
    """Log-density of ``W`` at ``X`` with respect to the Riemannian volume.

    ``log g(coords of Log_base X) - log J_base(Log_base X)``.  Setting
    ``include_jacobian=False`` drops the second term, which cancels when
    comparing models that share ``base``.
    """
    X = np.asarray(X, float)
    if X.shape[-2:] != W.base.shape:
        raise DimensionError(f"expected {W.base.shape} matrices, got {X.shape[-2:]}")
    c, logj = _coords_and_logjac(W.base, X)
    out = gaussian_logpdf(c, W.mu, W.cov)
    if include_jacobian:
        out = out - logj
    return out[()] if np.ndim(out) == 0 else out


def _shrink(S, shrinkage):
    m = S.shape[0]
    scale = np.trace(S) / m
    if scale <= 0:
        scale = 1.0
    return S + shrinkage * scale * np.eye(m)


def _check_rank(S, what):
    w = np.linalg.eigvalsh(S)
    if w[0] <= 1e-12 * max(w[-1], np.finfo(float).tiny):
        raise NumericalError(
            f"{what} is rank deficient (eigenvalues {w[0]:.2e}..{w[-1]:.2e}); "
            "pass shrinkage (e.g. 1e-6) to enable diagonal loading"
        )


def wg_fit_moments(samples, base, shrinkage=None):
    """Method-of-moments wrapped Gaussian with ``mu = 0``.

    ``cov`` is the second moment ``(1/N) sum c_i c_i^T`` of the normal
    coordinates of ``Log_base(X_i)``; at the Fréchet mean this equals the
    biased empirical covariance.  With ``shrinkage=lam``, ``lam * tr(cov)/m``
    is added to the diagonal (``lam`` alone if the trace vanishes).

    Raises
    ------
    NumericalError
        If ``cov`` is rank deficient and no shrinkage is requested.
    """
    X = geo.as_spd(samples, "samples")
    base = geo.as_spd(base, "base")
    if X.ndim == 2:
        X = X[None]
    C = geo.log_coords(base, X)
    S = C.T @ C / len(C)
    if shrinkage is not None:
        S = _shrink(S, shrinkage)
    else:
        _check_rank(S, "moment covariance")
    return WrappedGaussian(base, np.zeros(C.shape[1]), S)


def _profile(P, X):
    C, logj = _coords_and_logjac(P, X)
    mu = C.mean(axis=0)
    D = C - mu
    S = D.T @ D / len(C)
    m = C.shape[1]
    sign, logdet = np.linalg.slogdet(S)
    if sign <= 0:
        return -np.inf, mu, S
    ll = -0.5 * (m * np.log(2 * np.pi) + logdet + m) - logj.mean()
    return ll, mu, S


def wg_fit_mle(samples, init_base=None, tol=1e-6, max_iter=500, fd_step=1e-4,
               return_trace=False):
    """Maximum-likelihood wrapped Gaussian with free ``mu``.

    For a fixed base the optimal ``(mu, cov)`` are the coordinate mean and
    biased covariance; the base then follows Riemannian gradient ascent on
    the resulting profile (mean) log-likelihood, Jacobian term included.
    The gradient is taken by central differences in normal coordinates and
    steps use Armijo backtracking.  The base starts at the Fréchet mean.

    The base and ``mu`` are only weakly identified (moving the base can
    absorb part of ``mu``); the returned triple is the stationary point
    reached from that start.

    Returns
    -------
    WrappedGaussian, or ``(WrappedGaussian, trace)`` with the profile
    log-likelihood per outer iteration when ``return_trace`` is set.

    Raises
    ------
    ConvergenceError
        If the gradient norm is still above ``tol`` after ``max_iter``
        iterations or the line search stalls.
    """
    X = geo.as_spd(samples, "samples")
    n, d = X.shape[0], X.shape[-1]
    m = geo.coords_dim(d)
    if n <= m:
        raise ValueError(f"wg_fit_mle needs more than {m} samples, got {n}")
    P = geo.frechet_mean(X) if init_base is None else geo.as_spd(init_base)
    ll, mu, S = _profile(P, X)
    trace = [ll]
    step = 1.0
    eye = np.eye(m)
    for _ in range(max_iter):
        g = np.empty(m)
        for k in range(m):
            up = _profile(geo.exp_coords(P, fd_step * eye[k]), X)[0]
            dn = _profile(geo.exp_coords(P, -fd_step * eye[k]), X)[0]
            g[k] = (up - dn) / (2 * fd_step)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            W = WrappedGaussian(P, mu, S)
            return (W, trace) if return_trace else W
        step = min(2.0 * step, 1e3)
        while step > 1e-14:
            P_new = geo.exp_coords(P, step * g)
            ll_new, mu_new, S_new = _profile(P_new, X)
            if ll_new >= ll + 1e-4 * step * gnorm**2:
                break
            step *= 0.5
        else:
            raise ConvergenceError(
                f"wg_fit_mle line search stalled (gradient norm {gnorm:.3e})",
                last=WrappedGaussian(P, mu, S), residual=gnorm, trace=trace,
            )
        P, ll, mu, S = P_new, ll_new, mu_new, S_new
        trace.append(ll)
    raise ConvergenceError(
        f"wg_fit_mle did not converge in {max_iter} iterations",
        last=WrappedGaussian(P, mu, S), residual=gnorm, trace=trace,
    )
