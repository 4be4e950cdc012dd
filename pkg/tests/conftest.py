"""Shared random generators and independent reference implementations.

The ``ref_*`` helpers deliberately avoid the package: distances use a
Cholesky whitening and ``scipy.linalg`` matrix functions instead of the
eigendecomposition route taken by the library.
"""

import numpy as np
import pytest
from scipy import linalg


def random_spd(rng, d, spread=1.0, n=None):
    """SPD matrices ``expm(S)`` with log-eigenvalues of size ~``spread``."""
    shape = (d, d) if n is None else (n, d, d)
    A = rng.standard_normal(shape) * spread / np.sqrt(2 * d)
    S = A + np.swapaxes(A, -1, -2)
    w, U = np.linalg.eigh(S)
    return (U * np.exp(w)[..., None, :]) @ np.swapaxes(U, -1, -2)


def random_sym(rng, d, scale=1.0, n=None):
    shape = (d, d) if n is None else (n, d, d)
    A = rng.standard_normal(shape) * scale
    return (A + np.swapaxes(A, -1, -2)) / 2


def ref_distance(P, Q):
    """AIRM distance via generalized eigenvalues of (Q, P)."""
    lam = linalg.eigh(Q, P, eigvals_only=True)
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def ref_distances(P, Q):
    """Batched version: whiten with the Cholesky factor of P."""
    L = np.linalg.cholesky(P)
    Li = np.linalg.inv(L)
    M = Li @ Q @ np.swapaxes(Li, -1, -2)
    lam = np.linalg.eigvalsh((M + np.swapaxes(M, -1, -2)) / 2)
    return np.sqrt(np.sum(np.log(lam) ** 2, axis=-1))


def ref_exp(P, V):
    R = linalg.sqrtm(P).real
    Ri = linalg.inv(R)
    return R @ linalg.expm(Ri @ V @ Ri) @ R


def ref_log(P, X):
    R = linalg.sqrtm(P).real
    Ri = linalg.inv(R)
    return R @ linalg.logm(Ri @ X @ Ri).real @ R


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def ref_coords(Y, dY):
    """Orthonormal coordinates of a tangent vector at ``Y`` (scipy route)."""
    Ri = linalg.inv(linalg.sqrtm(Y).real)
    S = Ri @ dY @ Ri
    d = len(S)
    iu = np.triu_indices(d, 1)
    return np.concatenate([np.diag(S), np.sqrt(2) * S[iu]])


def fd_jacobian_det(P, V, h=1e-5):
    """Determinant of dExp_P at V between orthonormal frames, by central differences."""
    d = len(P)
    R = linalg.sqrtm(P).real
    Y = ref_exp(P, V)
    cols = []
    for i in range(d):
        for j in range(i, d):
            E = np.zeros((d, d))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1 / np.sqrt(2)
            E = R @ E @ R  # orthonormal at P
            dY = (ref_exp(P, V + h * E) - ref_exp(P, V - h * E)) / (2 * h)
            cols.append(ref_coords(Y, dY))
    return abs(np.linalg.det(np.array(cols).T))


def entry_space_mass(logpdf, P0, n=400_000, df=8, seed=0):
    """Integral of ``exp(logpdf)`` against the Riemannian volume, by importance sampling.

    Works in the Lebesgue coordinates of the independent matrix entries,
    where the affine-invariant volume element is
    ``2^(d(d-1)/4) det(X)^(-(d+1)/2) dX``.  The proposal is an equal mixture
    of a Wishart (covers the small-eigenvalue tail) and an inverse Wishart
    (covers the large-eigenvalue tail), both with mean ``P0``.

    Returns the estimate and its standard error.
    """
    from scipy import stats

    d = len(P0)
    wish = stats.wishart(df=df, scale=P0 / df)
    iwish = stats.invwishart(df=df, scale=P0 * (df - d - 1))
    X = np.concatenate([
        wish.rvs(size=n // 2, random_state=seed),
        iwish.rvs(size=n - n // 2, random_state=seed + 1),
    ])
    Xt = np.moveaxis(X, 0, -1)
    q = 0.5 * wish.pdf(Xt) + 0.5 * iwish.pdf(Xt)
    vol = 2.0 ** (d * (d - 1) / 4) * np.linalg.det(X) ** (-(d + 1) / 2)
    w = np.exp(logpdf(X)) * vol / q
    return w.mean(), w.std() / np.sqrt(n)


def zeta_closed_form_d2(sigma):
    """Normalization of the isotropic Gaussian for 2x2 matrices in closed form."""
    from scipy.special import erf

    return 2 * np.sqrt(2) * np.pi**2 * sigma**2 * np.exp(sigma**2 / 4) * erf(sigma / 2)


# -- acceptance reporting ------------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record ``(criterion, title, ok, detail)`` for the end-of-run summary."""

    def record(number, title, checks):
        ok = all(passed for _, passed in checks)
        detail = "; ".join(f"{text} [{'ok' if passed else 'FAIL'}]" for text, passed in checks)
        _ACCEPTANCE.append((number, title, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title} -- {detail}"
        )
