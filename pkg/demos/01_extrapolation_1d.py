"""Constant-leaf versus GP-extrapolated prediction on 1-D sine data.

Trees predict a constant beyond the training range, so both the point
prediction and the interval width freeze at the boundary.  The leaf-GP
predictive keeps tracking locally near the boundary and then widens toward
the prior the further out you ask.

Run:  python3 demos/01_extrapolation_1d.py
"""

import numpy as np

from bartgp import Dataset, FitConfig, GPConfig, RngStream, fit, predict, predict_gp

rng = np.random.default_rng(7)
x = np.sort(rng.uniform(-2 * np.pi, 2 * np.pi, size=150))
y = np.sin(x) + 0.1 * rng.normal(size=150)
train = Dataset(x[:, None], y)

draws = fit(train, FitConfig(num_trees=20, num_sweeps=100, burn_in=15), RngStream(1))

grid = np.linspace(-2 * np.pi - 4, 2 * np.pi + 4, 121)
test = Dataset(grid[:, None])
plain = predict(draws, test, 0.1, RngStream(2))
gp = predict_gp(draws, train, test, 0.1, GPConfig(), RngStream(2))

print("     x    truth   tree-mean  gp-mean   tree-width  gp-width")
for xi in (-2 * np.pi - 3, -2 * np.pi - 1, 0.0, 2 * np.pi + 1, 2 * np.pi + 3):
    i = int(np.argmin(np.abs(grid - xi)))
    print(f"{grid[i]:7.2f} {np.sin(grid[i]):7.2f} {plain.mean[i]:9.2f} {gp.mean[i]:9.2f}"
          f" {plain.hi[i] - plain.lo[i]:10.2f} {gp.hi[i] - gp.lo[i]:9.2f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for ax, res, title in ((axes[0], plain, "constant-leaf predictive"),
                           (axes[1], gp, "leaf-GP predictive")):
        ax.plot(x, y, "k.", ms=3, label="train")
        ax.plot(grid, np.sin(grid), "g-", lw=1, label="truth")
        ax.plot(grid, res.mean, "b-", lw=1.5, label="posterior mean")
        ax.fill_between(grid, res.lo, res.hi, alpha=0.25, label="90% interval")
        ax.axvline(x.min(), color="gray", ls="--", lw=0.8)
        ax.axvline(x.max(), color="gray", ls="--", lw=0.8)
        ax.set_title(title)
        ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig("demo_extrapolation_1d.png", dpi=120)
    print("\nwrote demo_extrapolation_1d.png")
except ImportError:
    print("\n(matplotlib not installed; table only)")
