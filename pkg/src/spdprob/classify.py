"""Bayes classifiers on the SPD manifold.

Every classifier here is a plug-in Bayes rule: each class ``k`` gets a
density (isotropic or wrapped Gaussian) and a prior, and a query goes to
the class with the largest ``log prior + log density``.  The classical
algorithms are special cases:

=========  ==========================================================
variant    class model
=========  ==========================================================
iso        ``G(X_k, sigma^2)``, shared ``sigma`` (MDM)
tslda      ``WG(X; mu_k, Sigma)``, shared base and covariance
tsqda      ``WG(X; mu_k, Sigma_k)``, shared base
wg-shared  ``WG(X_k; 0, Sigma)``, per-class base
wg-full    ``WG(X_k; 0, Sigma_k)``, per-class base
=========  ==========================================================

Labels are integers ``0 .. K-1``; ties go to the lowest class index.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .distributions import (
    WrappedGaussian,
    _check_rank,
    _shrink,
    gaussian_logpdf,
    iso_fit,
    log_jacobian_from_eigs,
)

VARIANTS = ("iso", "tslda", "tsqda", "wg-shared", "wg-full")
DEFAULT_SHRINKAGE = 1e-6


@dataclass(frozen=True)
class ClassModel:
    """Fitted per-class densities and priors.

    Attributes
    ----------
    variant : str
        One of :data:`VARIANTS`.
    priors : ndarray, shape (K,)
    bases : ndarray, shape (K, d, d)
        Class centers (``iso``) or base points; identical rows for the
        tangent-space variants.
    means : ndarray, shape (K, m) or None
        Coordinate means (wrapped variants).
    covs : ndarray, shape (K, m, m) or None
        Coordinate covariances; identical rows when shared.
    sigma : float
        Shared spread of the ``iso`` variant.
    """

    variant: str
    priors: np.ndarray
    bases: np.ndarray
    means: np.ndarray = None
    covs: np.ndarray = None
    sigma: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        priors = np.asarray(self.priors, float)
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ValueError("priors must be non-negative and sum to 1")
        K = len(priors)
        if len(self.bases) != K:
            raise ValueError("one base per class required")
        if self.variant != "iso" and (
            self.means is None or self.covs is None
            or len(self.means) != K or len(self.covs) != K
        ):
            raise ValueError(f"variant {self.variant} needs means and covs for {K} classes")

    @property
    def n_classes(self):
        return len(self.priors)

    @property
    def dim(self):
        return self.bases.shape[-1]


@dataclass(frozen=True)
class Prediction:
    """Predicted label(s) and per-class log-scores.

    For a single query ``label`` is an int and ``log_scores`` has shape
    ``(K,)``; for a stack they have shapes ``(n,)`` and ``(n, K)``.
    """

    label: object
    log_scores: np.ndarray


def _argmax(scores):
    # np.argmax returns the first maximum, i.e. the lowest class index
    lab = np.argmax(scores, axis=-1)
    return int(lab) if np.ndim(lab) == 0 else lab


def _split(X, y):
    X = geo.as_spd(X, "training matrices")
    y = np.asarray(y)
    if X.ndim != 3 or len(X) != len(y):
        raise ValueError("need a stack of matrices and one label per matrix")
    if not np.issubdtype(y.dtype, np.integer) or np.any(y < 0):
        raise ValueError("labels must be non-negative integers")
    K = int(y.max()) + 1
    counts = np.bincount(y, minlength=K)
    if np.any(counts == 0):
        raise ValueError(f"empty class(es): {np.flatnonzero(counts == 0).tolist()}")
    return X, y, K, counts


def _priors(counts, uniform):
    if uniform:
        return np.full(len(counts), 1.0 / len(counts))
    return counts / counts.sum()


def fit_mdm(X, y, table=None, uniform_priors=False, tol=1e-10):
    """Per-class Fréchet means (Minimum Distance to Mean).

    ``sigma`` is 1 unless a :class:`ZetaTable` is given, in which case it is
    the maximum-likelihood spread of the pooled within-class distances.
    Decisions of :func:`predict_mdm` never depend on it.
    """
    X, y, K, counts = _split(X, y)
    bases = np.stack([geo.frechet_mean(X[y == k], tol=tol) for k in range(K)])
    sigma = 1.0
    if table is not None:
        # pooled within-class dispersion: re-center every class at the identity
        centered = np.concatenate([
            geo.congruence(X[y == k], geo.invsqrtm(bases[k])) for k in range(K)
        ])
        sigma = iso_fit(centered, table, tol=tol).sigma
    return ClassModel("iso", _priors(counts, uniform_priors), bases, sigma=sigma)


def predict_mdm(model, Z):
    """Nearest class center; ``log_scores = -delta(Z, X_k)**2 / 2``."""
    if model.variant != "iso":
        raise ValueError("predict_mdm needs an 'iso' model")
    Z = np.asarray(Z, float)
    dist = np.stack([geo.airm_distance(b, Z) for b in model.bases], axis=-1)
    scores = -0.5 * dist**2
    return Prediction(_argmax(scores), scores)


def _tangent_fit(X, y, K, counts, tol):
    base = geo.frechet_mean(X, tol=tol)
    C = geo.log_coords(base, X)
    means = np.stack([C[y == k].mean(axis=0) for k in range(K)])
    covs = []
    for k in range(K):
        D = C[y == k] - means[k]
        covs.append(D.T @ D / counts[k])
    return base, means, np.stack(covs)


def _finish_covs(covs, shrinkage):
    out = []
    for S in covs:
        if shrinkage is None:
            _check_rank(S, "class covariance")
            out.append(S)
        else:
            out.append(_shrink(S, shrinkage))
    return np.stack(out)


def fit_tsqda(X, y, shrinkage=DEFAULT_SHRINKAGE, uniform_priors=False, tol=1e-10):
    """Tangent-space QDA: wrapped Gaussians at the Fréchet mean of all data.

    Coordinates are taken at the mean of the pooled training set; each class
    gets its own coordinate mean and (biased) covariance.
    """
    X, y, K, counts = _split(X, y)
    base, means, covs = _tangent_fit(X, y, K, counts, tol)
    return ClassModel(
        "tsqda", _priors(counts, uniform_priors), np.repeat(base[None], K, axis=0),
        means, _finish_covs(covs, shrinkage),
    )


def fit_tslda(X, y, shrinkage=DEFAULT_SHRINKAGE, uniform_priors=False, tol=1e-10):
    """Tangent-space LDA: as :func:`fit_tsqda` with the pooled within-class covariance."""
    X, y, K, counts = _split(X, y)
    base, means, covs = _tangent_fit(X, y, K, counts, tol)
    pooled = np.einsum("k,kij->ij", counts / counts.sum(), covs)
    pooled = _finish_covs(pooled[None], shrinkage)[0]
    return ClassModel(
        "tslda", _priors(counts, uniform_priors), np.repeat(base[None], K, axis=0),
        means, np.repeat(pooled[None], K, axis=0),
    )


def fit_wg_classifier(X, y, shared_cov=False, shrinkage=DEFAULT_SHRINKAGE,
                      uniform_priors=False, tol=1e-10):
    """Per-class wrapped Gaussians ``WG(X_k; 0, Sigma[_k])``.

    Each class is centered at its own Fréchet mean with the moment
    covariance of its normal coordinates there; ``shared_cov`` pools the
    covariances with class-frequency weights.
    """
    X, y, K, counts = _split(X, y)
    bases = np.stack([geo.frechet_mean(X[y == k], tol=tol) for k in range(K)])
    m = geo.coords_dim(X.shape[-1])
    covs = []
    for k in range(K):
        C = geo.log_coords(bases[k], X[y == k])
        covs.append(C.T @ C / counts[k])
    covs = np.stack(covs)
    if shared_cov:
        pooled = np.einsum("k,kij->ij", counts / counts.sum(), covs)
        covs = np.repeat(pooled[None], K, axis=0)
    variant = "wg-shared" if shared_cov else "wg-full"
    return ClassModel(
        variant, _priors(counts, uniform_priors), bases, np.zeros((K, m)),
        _finish_covs(covs, shrinkage),
    )


def class_log_densities(model, Z, table=None):
    """Per-class log-densities of ``Z``, shape ``(..., K)``."""
    Z = np.asarray(Z, float)
    if Z.shape[-2:] != (model.dim, model.dim):
        raise ValueError(f"expected {model.dim}x{model.dim} matrices, got {Z.shape[-2:]}")
    if model.variant == "iso":
        if table is None:
            raise ValueError("iso models need a ZetaTable to evaluate densities")
        dist = np.stack([geo.airm_distance(b, Z) for b in model.bases], axis=-1)
        return -(dist**2) / (2 * model.sigma**2) - table.log_zeta(model.sigma)
    out = []
    for k in range(model.n_classes):
        Pi = geo.invsqrtm(model.bases[k])
        w, U = np.linalg.eigh(geo._sym(Pi @ Z @ Pi))
        lw = np.log(np.maximum(w, geo._EIG_FLOOR))
        c = geo.sym_to_vec((U * lw[..., None, :]) @ geo._swap(U))
        out.append(gaussian_logpdf(c, model.means[k], model.covs[k])
                   - log_jacobian_from_eigs(lw))
    return np.stack(out, axis=-1)


def predict_bayes(model, Z, table=None):
    """Bayes rule: ``argmax_k log prior_k + log p_k(Z)``.

    ``Z`` may be one matrix or a stack.  ``table`` is required for ``iso``
    models.
    """
    with np.errstate(divide="ignore"):
        scores = np.log(model.priors) + class_log_densities(model, Z, table)
    return Prediction(_argmax(scores), scores)


def class_wrapped_gaussian(model, k):
    """The wrapped Gaussian of class ``k`` of a non-``iso`` model."""
    if model.variant == "iso":
        raise ValueError("iso models have no wrapped Gaussian classes")
    return WrappedGaussian(model.bases[k], model.means[k], model.covs[k])


def fit(X, y, variant, **kwargs):
    """Dispatch to the fitting routine of ``variant``."""
    if variant in ("iso", "mdm"):
        return fit_mdm(X, y, **kwargs)
    if variant == "tslda":
        return fit_tslda(X, y, **kwargs)
    if variant == "tsqda":
        return fit_tsqda(X, y, **kwargs)
    if variant in ("wg-shared", "wg-full"):
        return fit_wg_classifier(X, y, shared_cov=variant == "wg-shared", **kwargs)
    raise ValueError(f"unknown model {variant!r}")


def train_test_split(n, test_fraction=0.25, seed=0, labels=None):
    """Index arrays for a random split, stratified by ``labels`` when given."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    groups = [np.arange(n)] if labels is None else [
        np.flatnonzero(np.asarray(labels) == k) for k in np.unique(labels)
    ]
    test = []
    for idx in groups:
        idx = rng.permutation(idx)
        test.extend(idx[: int(round(test_fraction * len(idx)))])
    test = np.sort(np.asarray(test, dtype=int))
    train = np.setdiff1d(np.arange(n), test)
    return train, test
