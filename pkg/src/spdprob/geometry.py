"""Affine-invariant Riemannian geometry of the SPD manifold.

Points are plain ``ndarray`` objects of shape ``(d, d)``; most functions
also accept stacks of shape ``(n, d, d)`` and broadcast over the leading
axis.  Tangent vectors at a base point ``P`` are symmetric matrices, and
``to_coords`` / ``from_coords`` map them isometrically to vectors of
length ``m = d (d + 1) / 2`` (normal coordinates).

All matrix functions go through the symmetric eigendecomposition.
"""

import numpy as np

from .errors import ConvergenceError, DimensionError, NotSPDError, NumericalError

# eigenvalues are clamped here before taking logarithms
_EIG_FLOOR = 1e-300
_EXP_LIMIT = 700.0


def _swap(M):
    return np.swapaxes(M, -1, -2)


def _sym(M):
    return 0.5 * (M + _swap(M))


def _eigfun(M, fn):
    w, U = np.linalg.eigh(M)
    return (U * fn(w)[..., None, :]) @ _swap(U)


def as_spd(M, name="matrix"):
    """Symmetrize ``M`` and check positive definiteness.

    Parameters
    ----------
    M : array_like, shape (..., d, d)
        Matrix or stack of matrices.
    name : str
        Used in error messages.

    Returns
    -------
    ndarray
        ``(M + M.T) / 2`` as float64.

    Raises
    ------
    NotSPDError
        If a matrix is not square, not finite or has a non-positive
        eigenvalue.  For stacks, ``index`` holds the first failing position.
    """
    M = np.array(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise NotSPDError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        bad = np.argwhere(~np.isfinite(M).all(axis=(-1, -2)).reshape(-1))
        idx = int(bad[0, 0]) if M.ndim > 2 else None
        raise NotSPDError(f"{name} has non-finite entries", index=idx)
    M = _sym(M)
    w = np.linalg.eigvalsh(M)
    ok = (w[..., 0] > 0).reshape(-1)
    if not ok.all():
        idx = int(np.argmin(ok)) if M.ndim > 2 else None
        where = f" at index {idx}" if idx is not None else ""
        raise NotSPDError(
            f"{name}{where} is not positive definite "
            f"(smallest eigenvalue {w.reshape(-1, w.shape[-1])[idx or 0, 0]:.3e})",
            index=idx,
        )
    return M


def as_sym(V, name="tangent vector"):
    """Check that ``V`` is symmetric (up to rounding) and return it symmetrized."""
    V = np.array(V, dtype=float)
    if V.ndim < 2 or V.shape[-1] != V.shape[-2]:
        raise DimensionError(f"{name} must be square, got shape {V.shape}")
    scale = 1.0 + np.max(np.abs(V), initial=0.0)
    if np.max(np.abs(V - _swap(V)), initial=0.0) > 1e-12 * scale:
        raise DimensionError(f"{name} is not symmetric")
    if not np.all(np.isfinite(V)):
        raise NumericalError(f"{name} has non-finite entries")
    return _sym(V)


def _check_dims(P, X, what="arguments"):
    if P.shape[-1] != X.shape[-1] or P.shape[-2] != X.shape[-2]:
        raise DimensionError(
            f"dimension mismatch between {what}: {P.shape[-2:]} vs {X.shape[-2:]}"
        )


def sqrtm(P):
    """Principal square root of SPD matrices."""
    return _eigfun(P, np.sqrt)


def invsqrtm(P):
    """Inverse principal square root of SPD matrices."""
    return _eigfun(P, lambda w: 1.0 / np.sqrt(w))


def logm(P):
    """Principal logarithm of SPD matrices."""
    return _eigfun(P, lambda w: np.log(np.maximum(w, _EIG_FLOOR)))


def expm(S):
    """Exponential of symmetric matrices."""
    w, U = np.linalg.eigh(S)
    if np.max(w, initial=-np.inf) > _EXP_LIMIT:
        raise NumericalError(
            f"matrix exponential overflows (largest eigenvalue {np.max(w):.3g})"
        )
    return (U * np.exp(w)[..., None, :]) @ _swap(U)


def powm(P, alpha):
    """Real power ``P**alpha`` of SPD matrices."""
    return _eigfun(P, lambda w: w**alpha)


def airm_inner(P, U, V):
    """Affine-invariant inner product ``tr(P^-1 U P^-1 V)``.

    Parameters
    ----------
    P : ndarray, shape (d, d)
        Base point.
    U, V : ndarray, shape (..., d, d)
        Tangent vectors at ``P``.

    Returns
    -------
    float or ndarray
    """
    P, U, V = np.asarray(P, float), np.asarray(U, float), np.asarray(V, float)
    _check_dims(P, U, "base point and U")
    _check_dims(P, V, "base point and V")
    A = np.linalg.solve(P, U)
    B = np.linalg.solve(P, V)
    out = np.einsum("...ij,...ji->...", A, B)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite inner product")
    return out[()] if np.ndim(out) == 0 else out


def airm_norm(P, V):
    """Norm of the tangent vector ``V`` at ``P``."""
    return np.sqrt(np.maximum(airm_inner(P, V, V), 0.0))


def _whitened_eigvals(P, Q):
    Pi = invsqrtm(P)
    return np.linalg.eigvalsh(Pi @ Q @ Pi)


def airm_distance(P, Q):
    """Affine-invariant distance ``||log(P^-1/2 Q P^-1/2)||_F``.

    ``P`` and ``Q`` broadcast against each other over leading axes.
    """
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    _check_dims(P, Q)
    w = np.maximum(_whitened_eigvals(P, Q), _EIG_FLOOR)
    d = np.sqrt(np.sum(np.log(w) ** 2, axis=-1))
    return d[()] if np.ndim(d) == 0 else d


def pairwise_distances(X, Y=None):
    """Matrix of distances between the points of two stacks.

    Returns an array of shape ``(len(X), len(Y))``; with ``Y`` omitted the
    result is symmetric with an exactly zero diagonal.
    """
    X = np.asarray(X, float)
    sym = Y is None
    Y = X if sym else np.asarray(Y, float)
    _check_dims(X, Y)
    Xi = invsqrtm(X)
    W = Xi[:, None] @ Y[None, :] @ Xi[:, None]
    w = np.maximum(np.linalg.eigvalsh(W), _EIG_FLOOR)
    D = np.sqrt(np.sum(np.log(w) ** 2, axis=-1))
    if sym:
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    return D


def exp_map(P, V):
    """Riemannian exponential ``P^1/2 exp(P^-1/2 V P^-1/2) P^1/2``.

    Raises
    ------
    NumericalError
        If the whitened tangent vector is so large that ``exp`` overflows.
    """
    P, V = np.asarray(P, float), np.asarray(V, float)
    _check_dims(P, V)
    w, U = np.linalg.eigh(P)
    Ps = (U * np.sqrt(w)[..., None, :]) @ _swap(U)
    Pi = (U * (1.0 / np.sqrt(w))[..., None, :]) @ _swap(U)
    S = _sym(Pi @ V @ Pi)
    try:
        E = expm(S)
    except NumericalError as exc:
        norm = np.sqrt(np.sum(S * S, axis=(-1, -2)))
        raise NumericalError(
            f"exp_map overflow: tangent norm {np.max(norm):.4g} is too large"
        ) from exc
    return _sym(Ps @ E @ Ps)


def log_map(P, X):
    """Riemannian logarithm ``P^1/2 log(P^-1/2 X P^-1/2) P^1/2``."""
    P, X = np.asarray(P, float), np.asarray(X, float)
    _check_dims(P, X)
    w, U = np.linalg.eigh(P)
    Ps = (U * np.sqrt(w)[..., None, :]) @ _swap(U)
    Pi = (U * (1.0 / np.sqrt(w))[..., None, :]) @ _swap(U)
    return _sym(Ps @ logm(_sym(Pi @ X @ Pi)) @ Ps)


def geodesic(P, Q, t):
    """Point at fraction ``t`` of the geodesic from ``P`` to ``Q``.

    ``t`` must lie in ``[0, 1]``; extrapolation is refused.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    P, Q = np.asarray(P, float), np.asarray(Q, float)
    _check_dims(P, Q)
    if t == 0.0:
        return P.copy()
    if t == 1.0:
        return Q.copy()
    w, U = np.linalg.eigh(P)
    Ps = (U * np.sqrt(w)[..., None, :]) @ _swap(U)
    Pi = (U * (1.0 / np.sqrt(w))[..., None, :]) @ _swap(U)
    return _sym(Ps @ powm(_sym(Pi @ Q @ Pi), t) @ Ps)


def frechet_mean(points, weights=None, tol=1e-10, max_iter=200, init=None):
    """Weighted Fréchet (Karcher) mean by fixed-point iteration.

    Iterates ``X <- Exp_X(sum_i w_i Log_X(X_i))`` until the Riemannian
    gradient norm drops below ``tol``.

    Parameters
    ----------
    points : ndarray, shape (n, d, d)
        SPD matrices.
    weights : ndarray, shape (n,), optional
        Non-negative weights with positive sum. Uniform by default.
    tol : float
        Stopping threshold on the gradient norm.
    max_iter : int
        Maximum number of iterations.
    init : ndarray, shape (d, d), optional
        Starting point. Defaults to the weighted arithmetic mean.

    Returns
    -------
    ndarray, shape (d, d)

    Raises
    ------
    ConvergenceError
        When ``max_iter`` is exhausted; ``last`` and ``residual`` hold the
        final iterate and its gradient norm.
    """
    X = np.asarray(points, float)
    if X.ndim == 2:
        X = X[None]
    n = X.shape[0]
    if n == 0:
        raise ValueError("frechet_mean needs at least one point")
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, float)
        if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be non-negative, one per point, with positive sum")
        w = w / w.sum()
    M = _sym(np.einsum("i,ijk->jk", w, X)) if init is None else np.array(init, float)
    gnorm = np.inf
    for _ in range(max_iter):
        ev, U = np.linalg.eigh(M)
        Ms = (U * np.sqrt(ev)) @ U.T
        Mi = (U * (1.0 / np.sqrt(ev))) @ U.T
        G = np.einsum("i,ijk->jk", w, logm(_sym(Mi @ X @ Mi)))
        gnorm = float(np.linalg.norm(G))
        if gnorm <= tol:
            return M
        M = _sym(Ms @ expm(_sym(G)) @ Ms)
    raise ConvergenceError(
        f"frechet_mean did not converge in {max_iter} iterations "
        f"(gradient norm {gnorm:.3e})",
        last=M,
        residual=gnorm,
    )


def coords_dim(d):
    """Dimension ``d (d + 1) / 2`` of the tangent space of ``d x d`` SPD matrices."""
    return d * (d + 1) // 2


def matrix_dim(m):
    """Inverse of :func:`coords_dim`."""
    d = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if coords_dim(d) != m:
        raise DimensionError(f"{m} is not a triangular number")
    return d


def sym_to_vec(S):
    """Orthonormal coordinates of symmetric matrices under the Frobenius inner product.

    Diagonal entries first, then the strict upper triangle (row-major)
    scaled by ``sqrt(2)``.
    """
    S = np.asarray(S, float)
    d = S.shape[-1]
    iu = np.triu_indices(d, 1)
    diag = np.diagonal(S, axis1=-2, axis2=-1)
    return np.concatenate([diag, np.sqrt(2.0) * S[..., iu[0], iu[1]]], axis=-1)


def vec_to_sym(c):
    """Inverse of :func:`sym_to_vec`."""
    c = np.asarray(c, float)
    d = matrix_dim(c.shape[-1])
    S = np.zeros(c.shape[:-1] + (d, d))
    idx = np.arange(d)
    S[..., idx, idx] = c[..., :d]
    iu = np.triu_indices(d, 1)
    off = c[..., d:] / np.sqrt(2.0)
    S[..., iu[0], iu[1]] = off
    S[..., iu[1], iu[0]] = off
    return S


def to_coords(P, V):
    """Normal coordinates of tangent vectors ``V`` at ``P``.

    The map is a linear isometry: the dot product of the outputs equals
    :func:`airm_inner` of the inputs.
    """
    P, V = np.asarray(P, float), np.asarray(V, float)
    _check_dims(P, V)
    Pi = invsqrtm(P)
    return sym_to_vec(Pi @ V @ Pi)


def from_coords(P, c):
    """Tangent vectors at ``P`` from their normal coordinates."""
    P, c = np.asarray(P, float), np.asarray(c, float)
    m = coords_dim(P.shape[-1])
    if c.shape[-1] != m:
        raise DimensionError(f"expected coordinates of length {m}, got {c.shape[-1]}")
    Ps = sqrtm(P)
    return _sym(Ps @ vec_to_sym(c) @ Ps)


def log_coords(P, X):
    """Normal coordinates of ``Log_P(X)``, computed without leaving the whitened frame."""
    P, X = np.asarray(P, float), np.asarray(X, float)
    _check_dims(P, X)
    Pi = invsqrtm(P)
    return sym_to_vec(logm(_sym(Pi @ X @ Pi)))


def exp_coords(P, c):
    """``Exp_P`` applied to the tangent vector with normal coordinates ``c``."""
    P, c = np.asarray(P, float), np.asarray(c, float)
    Ps = sqrtm(P)
    return _sym(Ps @ expm(vec_to_sym(c)) @ Ps)


def congruence(P, A):
    """Congruence action ``A.T @ P @ A`` for an invertible ``A``."""
    P, A = np.asarray(P, float), np.asarray(A, float)
    if A.shape != (P.shape[-1], P.shape[-1]):
        raise DimensionError(f"A must be {P.shape[-1]}x{P.shape[-1]}, got {A.shape}")
    if not np.isfinite(np.linalg.cond(A)) or np.linalg.cond(A) > 1e14:
        raise ValueError("congruence matrix A is singular")
    return _sym(A.T @ P @ A)
