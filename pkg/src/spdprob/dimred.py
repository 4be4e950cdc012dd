"""Dimension reduction for SPD matrices: Riemannian t-SNE and Riemannian PCA.

t-SNE embeds ``d x d`` SPD matrices as ``2 x 2`` SPD matrices.  Input
affinities use the Gaussian kernel ``exp(-delta^2 / 2 s_i^2)`` with the
per-point width set by perplexity; output affinities use the Cauchy kernel
``1 / (1 + delta^2)``.  The KL divergence is minimized by Riemannian gradient
descent on the product of ``P_2`` copies.

PCA looks for ``W`` with orthonormal columns maximizing
``sum_i delta(W^T X_i W, W^T M W)^2`` where ``M`` is the Fréchet mean.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .distributions import WrappedGaussian, wg_sample
from .errors import ConvergenceError, DimensionError, NumericalError


# -- t-SNE ------------------------------------------------------------------


@dataclass(frozen=True)
class TsneConfig:
    """Settings for :func:`tsne_embed`."""

    perplexity: float = 30.0
    n_iter: int = 500
    learning_rate: float = 100.0
    early_exaggeration: tuple = (4.0, 50)
    seed: int = 0

    def __post_init__(self):
        if not self.perplexity > 1:
            raise ValueError("perplexity must exceed 1")
        if self.n_iter < 1 or not self.learning_rate > 0:
            raise ValueError("n_iter and learning_rate must be positive")
        factor, iters = self.early_exaggeration
        if not factor > 0 or iters < 0:
            raise ValueError("early_exaggeration must be (positive factor, iterations >= 0)")


def conditional_affinities(D, perplexity, n_bisect=100):
    """Row-conditional Gaussian affinities matching a target perplexity.

    Parameters
    ----------
    D : ndarray, shape (N, N)
        Pairwise distances.
    perplexity : float
        Target ``2**H`` of every row, with ``1 < perplexity <= N - 1``.
        Rows whose neighbors are all equidistant come out uniform
        regardless of the target.

    Returns
    -------
    P : ndarray, shape (N, N)
        ``P[i, j] = p_{j|i}``; rows sum to one, zero diagonal.
    sigma : ndarray, shape (N,)
        Kernel widths.
    """
    D = np.asarray(D, float)
    N = D.shape[0]
    if N < 3:
        raise ValueError("need at least three points")
    if not 1 < perplexity <= N - 1:
        raise ValueError(f"perplexity must lie in (1, {N - 1}], got {perplexity}")
    D2 = D**2
    np.fill_diagonal(D2, np.inf)
    D2 = D2 - D2.min(axis=1, keepdims=True)
    finite = np.where(np.isfinite(D2), D2, 0.0)
    top = finite.max(axis=1)
    # rows with all neighbors equidistant are uniform for every width, so
    # their perplexity is fixed at N - 1 whatever the target
    flat = top == 0
    pos = np.where(finite > 0, finite, np.inf)
    gap = pos.min(axis=1)
    top = np.where(flat, 1.0, top)
    gap = np.where(np.isfinite(gap), gap, 1.0)
    lo = np.log(1e-10 / top)
    hi = np.log(1e3 / gap)
    target = np.log2(perplexity)

    def entropy(logb):
        beta = np.exp(logb)[:, None]
        E = np.exp(-beta * D2)
        S = E.sum(axis=1)
        P = E / S[:, None]
        H = (np.log(S) + beta[:, 0] * np.sum(P * np.where(np.isfinite(D2), D2, 0.0), axis=1))
        return H / np.log(2.0), P

    h_lo, _ = entropy(lo)
    h_hi, _ = entropy(hi)
    bad = np.flatnonzero((h_lo < target - 1e-12) | (h_hi > target + 1e-12))
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        h_mid, _ = entropy(mid)
        above = h_mid > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    logb = 0.5 * (lo + hi)
    H, P = entropy(logb)
    err = np.abs(2.0**H - perplexity) / perplexity
    bad = np.union1d(bad, np.flatnonzero(err > 1e-5))
    bad = bad[~flat[bad]]
    if len(bad):
        tiny = 1e-10 * max(float(np.max(D)), 1.0)
        dup = np.argwhere(np.triu(np.asarray(D) <= tiny, 1))
        hint = f"; duplicate point pairs {dup.tolist()[:10]}" if len(dup) else ""
        raise NumericalError(
            f"perplexity {perplexity} not attainable for rows {bad.tolist()[:10]}{hint}"
        )
    return P, np.sqrt(0.5 / np.exp(logb))


def tsne_affinities(points, perplexity):
    """Symmetric joint affinities ``p_ij = (p_{j|i} + p_{i|j}) / 2N``.

    The result is symmetric, has a zero diagonal and sums to one.
    """
    X = np.asarray(points, float)
    P, _ = conditional_affinities(geo.pairwise_distances(X), perplexity)
    N = len(P)
    return (P + P.T) / (2.0 * N)


def _pairwise_logs(Y):
    """Whitened logarithms ``log(Y_i^-1/2 Y_j Y_i^-1/2)`` and squared distances."""
    w, U = np.linalg.eigh(Y)
    Yi = (U * (1.0 / np.sqrt(w))[:, None, :]) @ np.swapaxes(U, -1, -2)
    Ys = (U * np.sqrt(w)[:, None, :]) @ np.swapaxes(U, -1, -2)
    M = Yi[:, None] @ Y[None, :] @ Yi[:, None]
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    ew, EU = np.linalg.eigh(M)
    lw = np.log(np.maximum(ew, geo._EIG_FLOOR))
    L = (EU * lw[..., None, :]) @ np.swapaxes(EU, -1, -2)
    D2 = np.sum(lw**2, axis=-1)
    D2 = 0.5 * (D2 + D2.T)
    np.fill_diagonal(D2, 0.0)
    return L, D2, Ys


def _tsne_energy(P, D2, alpha):
    """``-alpha sum p log w + log Z`` and the normalized output affinities."""
    Wk = 1.0 / (1.0 + D2)
    np.fill_diagonal(Wk, 0.0)
    Z = Wk.sum()
    mask = P > 0
    energy = alpha * np.sum(P[mask] * np.log1p(D2[mask])) + np.log(Z)
    return energy, Wk, Z


def kl_divergence(P, Y):
    """``KL(P || Q)`` of the output affinities of the embedding ``Y``."""
    _, D2, _ = _pairwise_logs(np.asarray(Y, float))
    energy, _, _ = _tsne_energy(P, D2, 1.0)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask])) + energy)


def _tsne_init(N, seed):
    jitter = WrappedGaussian(np.eye(2), np.zeros(3), 1e-4 * np.eye(3))
    return wg_sample(jitter, N, seed=seed)


def tsne_embed(points, cfg=None, init=None, return_trace=False):
    """Embed SPD matrices as ``2 x 2`` SPD matrices with Riemannian t-SNE.

    Parameters
    ----------
    points : ndarray, shape (N, d, d)
    cfg : TsneConfig, optional
    init : ndarray, shape (N, 2, 2), optional
        Starting configuration; by default a seeded wrapped-Gaussian jitter
        around the identity.
    return_trace : bool
        Also return the KL divergence after every iteration (index 0 is the
        initial configuration).

    Returns
    -------
    Y : ndarray, shape (N, 2, 2)
    trace : list of float, only with ``return_trace``

    Notes
    -----
    The Riemannian gradient at ``Y_i`` is
    ``-4 sum_j (p_ij - q_ij) w_ij Log_{Y_i}(Y_j)`` and each step moves
    ``Y_i`` along ``Exp_{Y_i}``.  Steps are accepted by Armijo backtracking
    on the current objective, so descent is monotone within each phase
    (exaggerated and plain).
    """
    cfg = cfg or TsneConfig()
    X = np.asarray(points, float)
    N = len(X)
    P = tsne_affinities(X, cfg.perplexity)
    mask = P > 0
    neg_entropy = float(np.sum(P[mask] * np.log(P[mask])))
    Y = _tsne_init(N, cfg.seed) if init is None else geo.as_spd(init, "init").copy()
    if Y.shape != (N, 2, 2):
        raise DimensionError(f"init must have shape ({N}, 2, 2)")

    factor, n_exag = cfg.early_exaggeration
    step = cfg.learning_rate
    L, D2, Ys = _pairwise_logs(Y)
    kl0, _, _ = _tsne_energy(P, D2, 1.0)
    trace = [neg_entropy + kl0]
    phase_alpha = None
    for it in range(cfg.n_iter):
        alpha = factor if it < n_exag else 1.0
        if alpha != phase_alpha:
            energy, Wk, Z = _tsne_energy(P, D2, alpha)
            phase_alpha = alpha
        coef = 4.0 * (alpha * P - Wk / Z) * Wk
        # descent direction in the whitened frame at each Y_i
        S = np.einsum("ij,ijkl->ikl", coef, L)
        gnorm2 = float(np.sum(S * S))
        if not np.isfinite(gnorm2):
            raise NumericalError(f"non-finite t-SNE gradient at iteration {it}", )
        if gnorm2 == 0.0:
            trace.append(trace[-1])
            continue
        while True:
            Y_new = Ys @ geo.expm(step * S) @ Ys
            Y_new = 0.5 * (Y_new + np.swapaxes(Y_new, -1, -2))
            L_new, D2_new, Ys_new = _pairwise_logs(Y_new)
            e_new, W_new, Z_new = _tsne_energy(P, D2_new, alpha)
            if not np.isfinite(e_new):
                raise ConvergenceError(
                    f"non-finite KL at iteration {it}", last=Y, trace=trace
                )
            if e_new <= energy - 1e-4 * step * gnorm2:
                break
            step *= 0.5
            if step < 1e-12:
                break
        if step < 1e-12:
            trace.append(trace[-1])
            step = cfg.learning_rate
            continue
        Y, L, D2, Ys = Y_new, L_new, D2_new, Ys_new
        energy, Wk, Z = e_new, W_new, Z_new
        kl = energy if alpha == 1.0 else _tsne_energy(P, D2, 1.0)[0]
        trace.append(neg_entropy + kl)
        step *= 1.2
    return (Y, trace) if return_trace else Y


def spd2_to_xyz(Y):
    """3D point ``(a, b, c)`` of the ``2 x 2`` matrix ``[[a, b], [b, c]]``.

    Accepts a single matrix (returns a tuple) or a stack (returns ``(n, 3)``).
    """
    Y = np.asarray(Y, float)
    if Y.shape[-2:] != (2, 2):
        raise DimensionError(f"expected 2x2 matrices, got {Y.shape[-2:]}")
    out = np.stack([Y[..., 0, 0], Y[..., 0, 1], Y[..., 1, 1]], axis=-1)
    return tuple(float(v) for v in out) if out.ndim == 1 else out


# -- PCA --------------------------------------------------------------------


@dataclass(frozen=True)
class PcaProjector:
    """Orthonormal ``d x p`` basis ``w`` and the objective it reached."""

    w: np.ndarray
    objective: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, float)
        if w.ndim != 2 or w.shape[1] > w.shape[0]:
            raise DimensionError(f"w must be d x p with p <= d, got {w.shape}")
        if np.max(np.abs(w.T @ w - np.eye(w.shape[1]))) > 1e-10:
            raise ValueError("w must have orthonormal columns")
        object.__setattr__(self, "w", w)

    @property
    def d(self):
        return self.w.shape[0]

    @property
    def p(self):
        return self.w.shape[1]


def pca_objective(W, X, mean):
    """``sum_i delta(W^T X_i W, W^T mean W)^2``."""
    W = np.asarray(W, float)
    A = W.T @ X @ W
    B = W.T @ mean @ W
    return float(np.sum(geo.airm_distance(B, A) ** 2))


def pca_gradient(W, X, mean):
    """Euclidean gradient of :func:`pca_objective` with respect to ``W``.

    With ``A_i = W^T X_i W`` and ``B = W^T mean W`` the gradient of
    ``delta(A, B)^2`` in ``A`` is ``-2 A^-1/2 log(A^-1/2 B A^-1/2) A^-1/2``
    (and symmetrically in ``B``); the chain rule through the congruence
    gives ``2 X W G``.
    """
    W = np.asarray(W, float)
    A = W.T @ X @ W
    B = W.T @ mean @ W
    Ai = geo.invsqrtm(A)
    Bi = geo.invsqrtm(B)
    GA = -2.0 * Ai @ geo.logm(geo._sym(Ai @ B @ Ai)) @ Ai
    GB = -2.0 * Bi @ geo.logm(geo._sym(Bi @ A @ Bi)) @ Bi
    return 2.0 * np.sum(X @ W @ GA, axis=0) + 2.0 * mean @ W @ GB.sum(axis=0)


def _qf(M):
    Q, R = np.linalg.qr(M)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def _stiefel_ascent(W, X, mean, tol, max_iter, trace):
    f = pca_objective(W, X, mean)
    trace.append(f)
    step = 1.0
    for _ in range(max_iter):
        G = pca_gradient(W, X, mean)
        xi = G - W @ geo._sym(W.T @ G)
        gnorm2 = float(np.sum(xi * xi))
        if np.sqrt(gnorm2) <= tol * (1.0 + abs(f)):
            return W, f, True
        step = min(step * 2.0, 1e6)
        while step > 1e-16:
            W_new = _qf(W + step * xi)
            f_new = pca_objective(W_new, X, mean)
            if f_new >= f + 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            # line search exhausted: the iterate is stationary to working precision
            return W, f, True
        W, f = W_new, f_new
        trace.append(f)
    return W, f, False


def _pca_init(X, mean, p):
    Mi = geo.invsqrtm(mean)
    L = geo.logm(geo._sym(Mi @ X @ Mi))
    S = np.mean(L @ L, axis=0)
    _, U = np.linalg.eigh(S)
    return _qf(Mi @ U[:, ::-1][:, :p])


def pca_fit(points, p, tol=1e-8, max_iter=1000, n_restarts=3, seed=0,
            return_trace=False):
    """Riemannian PCA onto ``p x p`` SPD matrices.

    Maximizes :func:`pca_objective` over ``d x p`` matrices with orthonormal
    columns by Riemannian gradient ascent (QR retraction, Armijo
    backtracking).  One start comes from the leading eigenvectors of the
    mean squared whitened logarithm, ``n_restarts`` more are random; the best
    final objective wins.

    Returns
    -------
    PcaProjector, or ``(PcaProjector, trace)`` where ``trace`` holds the
    objective of every accepted iterate of the winning run.

    Raises
    ------
    ConvergenceError
        If no run reaches the gradient tolerance in ``max_iter`` iterations;
        ``last`` holds the best projector found.
    """
    X = geo.as_spd(points, "points")
    if X.ndim != 3 or len(X) < 2:
        raise ValueError("pca_fit needs at least two matrices")
    d = X.shape[-1]
    if not 1 <= p <= d:
        raise ValueError(f"p must lie in [1, {d}]")
    mean = geo.frechet_mean(X)
    if p == d:
        proj = PcaProjector(np.eye(d), pca_objective(np.eye(d), X, mean))
        return (proj, [proj.objective]) if return_trace else proj
    rng = np.random.default_rng(seed)
    starts = [_pca_init(X, mean, p)]
    starts += [_qf(rng.standard_normal((d, p))) for _ in range(n_restarts)]
    best = None
    for W0 in starts:
        trace = []
        W, f, ok = _stiefel_ascent(W0, X, mean, tol, max_iter, trace)
        if best is None or f > best[1]:
            best = (W, f, ok, trace)
    W, f, ok, trace = best
    proj = PcaProjector(_qf(W), f)
    if not ok:
        raise ConvergenceError(
            f"pca_fit did not converge in {max_iter} iterations", last=proj,
            residual=None, trace=trace,
        )
    return (proj, trace) if return_trace else proj


def pca_project(proj, X):
    """Project SPD matrices: ``W^T X W``."""
    X = np.asarray(X, float)
    if X.shape[-1] != proj.d:
        raise DimensionError(f"expected {proj.d}x{proj.d} matrices, got {X.shape[-2:]}")
    return geo._sym(proj.w.T @ X @ proj.w)
