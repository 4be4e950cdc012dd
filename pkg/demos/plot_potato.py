"""
Riemannian potato
=================

Online artifact rejection: calibrate on clean data, then stream new
matrices and update the reference with the accepted ones.
"""

import numpy as np

from spdprob import outlier as pot
from spdprob.distributions import IsotropicGaussian, iso_sample

clean = iso_sample(IsotropicGaussian(np.diag([2.0, 1.0]), 0.3), 300, seed=0)
state = pot.potato_calibrate(clean, z_th=2.5)
print(f"mu={state.mu:.3f} sigma={state.sigma:.3f} radius={state.radius:.3f}")

# a stream with a few corrupted samples
stream = iso_sample(IsotropicGaussian(np.diag([2.0, 1.0]), 0.3), 50, seed=1)
stream[::10] *= np.exp(3.0)
state, z, accepted = pot.potato_stream(state, stream)
print("rejected positions:", np.flatnonzero(~accepted))
print("their z-scores:", np.round(z[~accepted], 2))
print("reference after the stream:\n", state.reference)
