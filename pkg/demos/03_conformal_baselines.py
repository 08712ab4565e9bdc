"""Jackknife+ and CV+ intervals around the tree ensemble.

Both constructions refit the regressor with rows (or folds) held out and
calibrate interval widths from the held-out residuals.  They are well
calibrated where train and test are exchangeable, but, unlike the leaf-GP
predictive, their widths cannot grow into the exterior region.

Run:  python3 demos/03_conformal_baselines.py   (about a minute: 40 refits)
"""

import numpy as np

from bartgp import (Dataset, FitConfig, RngStream, classify_exterior, cv_plus,
                    ensemble_regressor, jackknife_plus)

rng = np.random.default_rng(3)
n, d = 40, 10
gamma = -2 + 4 * np.arange(d) / (d - 1)
Xtr = rng.normal(size=(n, d))
ytr = Xtr @ gamma + rng.normal(size=n)
Xte = rng.normal(size=(150, d)) * 1.5
yte = Xte @ gamma + rng.normal(size=150)
train, test = Dataset(Xtr, ytr), Dataset(Xte)
exterior = classify_exterior(Xtr, Xte)

reg = ensemble_regressor(FitConfig(num_trees=20, num_sweeps=100, burn_in=15))
jk = jackknife_plus(reg, train, test, 0.1, RngStream(10))
cv = cv_plus(reg, train, test, 5, 0.1, RngStream(10))

print(f"exterior fraction: {exterior.mean():.2f}\n")
print(f"{'method':12s} {'slice':9s} {'coverage of y':>14s} {'mean width':>11s}")
for name, res in (("jackknife+", jk), ("cv+ (K=5)", cv)):
    for label, m in (("interior", ~exterior), ("exterior", exterior)):
        cov = np.mean((res.lo[m] <= yte[m]) & (yte[m] <= res.hi[m]))
        print(f"{name:12s} {label:9s} {cov:14.3f} {np.mean(res.hi[m] - res.lo[m]):11.2f}")
