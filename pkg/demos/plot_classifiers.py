"""
Classifying SPD matrices
========================

Minimum distance to mean, tangent-space LDA/QDA and wrapped Gaussian
Bayes classifiers on synthetic covariance data.
"""

import numpy as np

from spdprob import classify as C
from spdprob import io

# three isotropic classes at distance 1.5 from each other's reference
config = io.separable_fixture(d=3, n_per_class=80, n_classes=3, separation=1.5, sigma=0.5)
ds = io.generate(config, seed=0)
train, test = C.train_test_split(len(ds.labels), 0.3, seed=0, labels=ds.labels)
X, y = ds.matrices[train], ds.labels[train]
Z, t = ds.matrices[test], ds.labels[test]

for variant in ("mdm", "tslda", "tsqda", "wg-shared", "wg-full"):
    model = C.fit(X, y, variant)
    pred = C.predict_mdm(model, Z) if variant == "mdm" else C.predict_bayes(model, Z)
    print(f"{variant:10s} accuracy {np.mean(pred.label == t):.3f}")

# with uniform priors, nearest-mean and Bayes rules agree for isotropic classes
from spdprob.distributions import build_zeta_table

table = build_zeta_table(3)
iso = C.fit_mdm(X, y, table=table, uniform_priors=True)
same = C.predict_mdm(iso, Z).label == C.predict_bayes(iso, Z, table).label
print("MDM and isotropic Bayes agree on", same.sum(), "of", len(same), "queries")
