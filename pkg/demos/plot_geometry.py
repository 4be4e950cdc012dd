"""
Affine-invariant geometry of SPD matrices
=========================================

Distances, exponential and logarithm maps, geodesics and the Frechet mean.
"""

import numpy as np

from spdprob import geometry as geo

rng = np.random.default_rng(0)

# two random SPD matrices
A = rng.standard_normal((3, 3))
P = A @ A.T + np.eye(3)
B = rng.standard_normal((3, 3))
Q = B @ B.T + np.eye(3)

print("d(P, Q) =", geo.airm_distance(P, Q))

# the distance does not change under congruence X -> G X G^T
G = rng.standard_normal((3, 3)) + 2 * np.eye(3)
print("d(GPG', GQG') =", geo.airm_distance(geo.congruence(P, G), geo.congruence(Q, G)))

# Log at P gives the initial velocity of the geodesic to Q; Exp undoes it
V = geo.log_map(P, Q)
print("|Exp_P(Log_P Q) - Q| =", np.linalg.norm(geo.exp_map(P, V) - Q))
print("|V|_P =", geo.airm_norm(P, V))

# the midpoint of the geodesic is equidistant from both ends
M = geo.geodesic(P, Q, 0.5)
print("d(P, M), d(M, Q) =", geo.airm_distance(P, M), geo.airm_distance(M, Q))

# normal coordinates at P are an isometry onto R^m, m = d(d+1)/2
c = geo.log_coords(P, Q)
print("coordinates:", c.shape, " |c| =", np.linalg.norm(c))

# Frechet mean of a cloud, compared with the arithmetic mean
X = np.stack([P, Q, np.eye(3), np.diag([4.0, 1.0, 0.25])])
mean = geo.frechet_mean(X)
print("sum of squared distances to the Frechet mean:",
      np.sum(geo.airm_distance(mean, X) ** 2))
print("... and to the arithmetic mean:",
      np.sum(geo.airm_distance(X.mean(axis=0), X) ** 2))
