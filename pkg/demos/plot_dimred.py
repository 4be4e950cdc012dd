"""
Dimension reduction
===================

Riemannian t-SNE into 2x2 SPD matrices and geodesic PCA to a smaller
SPD manifold.
"""

import numpy as np

from spdprob import dimred as dr
from spdprob import geometry as geo
from spdprob.distributions import IsotropicGaussian, iso_sample

# two clusters of 4x4 matrices
c1 = geo.exp_coords(np.eye(4), np.r_[3.0, np.zeros(9)])
X = np.concatenate([
    iso_sample(IsotropicGaussian(np.eye(4), 0.3), 40, seed=0),
    iso_sample(IsotropicGaussian(c1, 0.3), 40, seed=1),
])
labels = np.repeat([0, 1], 40)

Y, trace = dr.tsne_embed(X, dr.TsneConfig(perplexity=10, n_iter=200), return_trace=True)
print(f"KL divergence {trace[0]:.3f} -> {trace[-1]:.3f}")

# each 2x2 embedding is a point (a, b, c) inside the SPD cone
xyz = dr.spd2_to_xyz(Y)
for k in (0, 1):
    print("cluster", k, "centroid in (a, b, c):", xyz[labels == k].mean(axis=0).round(3))

# PCA: find W with orthonormal columns so that X -> W' X W keeps the most
# squared distance to the projected mean
proj = dr.pca_fit(X, 2)
low = dr.pca_project(proj, X)
print("projected shape:", low.shape, " objective:", round(proj.objective, 4))
