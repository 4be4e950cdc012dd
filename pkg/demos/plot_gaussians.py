"""
Isotropic and wrapped Gaussians
===============================

Normalizing constants, exact sampling and maximum-likelihood fitting.
"""

import numpy as np
from scipy.special import erf

from spdprob import distributions as dist
from spdprob import geometry as geo

# The isotropic Gaussian exp(-d(X, center)^2 / (2 sigma^2)) / zeta(sigma)
# needs zeta, which is tabulated by Monte Carlo once per dimension.
table = dist.build_zeta_table(2, mc_samples=100_000)
for s in (0.1, 0.5, 1.0):
    exact = 2 * np.sqrt(2) * np.pi**2 * s**2 * np.exp(s**2 / 4) * erf(s / 2)
    print(f"sigma={s}: zeta table {np.exp(table.log_zeta(s)):.5f}  closed form {exact:.5f}")

# exact sampling by rejection
center = np.array([[2.0, 0.3], [0.3, 0.5]])
G = dist.IsotropicGaussian(center, 0.4)
X = dist.iso_sample(G, 2000, seed=1)
print("sample Frechet mean:\n", geo.frechet_mean(X))

# maximum likelihood recovers center and sigma
fit = dist.iso_fit(X, table)
print("fitted sigma:", fit.sigma)

# Wrapped Gaussian: a Gaussian in normal coordinates pushed through Exp.
# The volume factor from the exponential map is the Jacobian below.
V = geo.log_map(center, X[0])
print("Jacobian of Exp at V:", dist.jacobian_det(center, V))

W = dist.WrappedGaussian(center, np.zeros(3), np.diag([0.2, 0.05, 0.1]))
Y = dist.wg_sample(W, 3000, seed=2)
mom = dist.wg_fit_moments(Y, geo.frechet_mean(Y))
mle = dist.wg_fit_mle(Y)
print("moments fit covariance diagonal:", np.diag(mom.cov))
print("mean log-likelihood, moments vs MLE:",
      dist.wg_log_density(mom, Y).mean(), dist.wg_log_density(mle, Y).mean())
