"""Treatment-effect extrapolation where only one arm is observed.

A one-dimensional study: the treatment probability rises linearly with x and
saturates, so to the right of x = 6.25 every unit is treated and to the left
of x = -6.25 every unit is control.  The plain causal forest freezes its
effect estimate at the overlap boundary; the overlap-GP variant extrapolates
the trend and widens its intervals with distance.

Run:  python3 demos/04_causal_nonoverlap.py   (about 20 s)
"""

import numpy as np

from bartgp import (CausalConfig, CausalDataset, Dataset, RngStream, fit_xbcf, predict_cate,
                    predict_cate_gp)

rng = np.random.default_rng(11)
n = 500
x = rng.uniform(-10, 10, size=n)
pi = np.clip(0.08 * x + 0.5, 0.0, 1.0)
z = (rng.uniform(size=n) < pi).astype(float)
f = np.sin(x) + 0.25 * x * z
y = f + 0.2 * np.std(f) * rng.normal(size=n)
data = CausalDataset(x[:, None], z, y)

draws = fit_xbcf(data, CausalConfig(), RngStream(1))

grid = np.linspace(-10, 10, 81)
test = Dataset(grid[:, None])
plain = predict_cate(draws, test, 0.05)
gp = predict_cate_gp(draws, data, test, 0.05, rng=RngStream(2))

print("      x   true-effect  plain-mean  gp-mean  plain-width  gp-width")
for xi in (-9.0, -4.0, 0.0, 4.0, 7.0, 9.0):
    i = int(np.argmin(np.abs(grid - xi)))
    print(f"{grid[i]:7.2f} {0.25 * grid[i]:12.2f} {plain.mean[i]:11.2f} {gp.mean[i]:8.2f}"
          f" {plain.hi[i] - plain.lo[i]:12.2f} {gp.hi[i] - gp.lo[i]:9.2f}")

right = grid > 6.25
truth = 0.25 * grid
print(f"\nright non-overlap RMSE: plain "
      f"{np.sqrt(np.mean((plain.mean[right] - truth[right]) ** 2)):.3f}, "
      f"gp {np.sqrt(np.mean((gp.mean[right] - truth[right]) ** 2)):.3f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    for ax, res, title in ((axes[0], plain, "constant-leaf effects"),
                           (axes[1], gp, "overlap-GP effects")):
        ax.plot(grid, truth, "g-", lw=1, label="true effect 0.25x")
        ax.plot(grid, res.mean, "b-", lw=1.5, label="posterior mean")
        ax.fill_between(grid, res.lo, res.hi, alpha=0.25, label="95% interval")
        ax.axvline(-6.25, color="gray", ls="--", lw=0.8)
        ax.axvline(6.25, color="gray", ls="--", lw=0.8)
        ax.set_title(title)
        ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig("demo_causal_nonoverlap.png", dpi=120)
    print("wrote demo_causal_nonoverlap.png")
except ImportError:
    print("(matplotlib not installed; table only)")
