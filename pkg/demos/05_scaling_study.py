"""Wall-time scaling of fitting plus GP prediction with sample size.

Replays the timing study: train and test sizes grow together and the cost of
one fit plus one GP-extrapolated prediction is recorded per size.  Growth is
close to linear because each leaf GP is capped at a fixed subsample.

Run:  python3 demos/05_scaling_study.py   (about 30 s)
"""

import time

import numpy as np

from bartgp import FitConfig, GPConfig, RegressionDGP, RngStream, fit, gen_regression, predict_gp
from bartgp.data import write_csv

sizes = [50, 100, 150, 200, 300, 500]
times = []
for n in sizes:
    train, test, _ = gen_regression(RegressionDGP("linear", n_train=n, n_test=n), RngStream(n))
    t0 = time.perf_counter()
    draws = fit(train, FitConfig(), RngStream(1, n))
    predict_gp(draws, train, test, 0.1, GPConfig(), RngStream(2, n))
    times.append(time.perf_counter() - t0)
    print(f"n = {n:4d}: fit + gp-predict {times[-1]:6.2f} s")

slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
print(f"\nlog-log slope: {slope:.2f} (1 = linear, 2 = quadratic)")
write_csv("demo_scaling.csv", {"n": np.array(sizes, float), "time_s": np.array(times)})
print("wrote demo_scaling.csv")
