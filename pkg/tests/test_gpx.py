import math

import numpy as np
import pytest

from bartgp import (DataError, Dataset, FitConfig, GPConfig, GPSingularError, Tree,
                    active_variables, fit, gp_conditional, leaf_hypercube, predict,
                    predict_from_root, predict_gp, sq_exp_kernel)
from bartgp.gpx import Hypercube, _chol_with_jitter, _gram
from bartgp.rng import RngStream


# ---------------------------------------------------------------- hypercube

def _manual_quantile(sorted_vals, q):
    idx = q * (len(sorted_vals) - 1)
    lo, hi = int(math.floor(idx)), int(math.ceil(idx))
    frac = idx - lo
    return sorted_vals[lo] * (1 - frac) + sorted_vals[hi] * frac


def test_hypercube_central_quantiles_on_grid():
    # independent linear-interpolation oracle on the 100-point grid 0..99
    rows = np.arange(100.0)[:, None]
    cube = leaf_hypercube(rows, (0,), 0.95)
    vals = np.arange(100.0)
    assert cube.lo[0] == pytest.approx(_manual_quantile(vals, 0.025), abs=1e-12)
    assert cube.hi[0] == pytest.approx(_manual_quantile(vals, 0.975), abs=1e-12)
    assert cube.lo[0] == pytest.approx(2.475)
    assert cube.hi[0] == pytest.approx(96.525)


def test_hypercube_full_coverage_is_minmax():
    gen = np.random.default_rng(0)
    rows = gen.normal(size=(37, 3))
    cube = leaf_hypercube(rows, (0, 2), 1.0)
    assert cube.lo[0] == rows[:, 0].min() and cube.hi[0] == rows[:, 0].max()
    assert cube.lo[1] == rows[:, 2].min() and cube.hi[1] == rows[:, 2].max()


def test_hypercube_single_row_degenerate():
    cube = leaf_hypercube(np.array([[1.5, -2.0]]), (0, 1), 0.95)
    np.testing.assert_array_equal(cube.lo, [1.5, -2.0])
    np.testing.assert_array_equal(cube.hi, [1.5, -2.0])


def test_active_variables_cases():
    cube = Hypercube((1, 2), np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    inside = np.array([[9.0, 0.5, 0.5], [9.0, 1.0, 0.0]])  # bounds count as inside
    assert active_variables(inside, cube) == ()
    one_out = np.vstack([inside, [[9.0, 0.5, 2.0]]])
    assert active_variables(one_out, cube) == (2,)
    both_out = np.array([[9.0, -1.0, 0.5], [9.0, 0.5, 3.0]])
    assert active_variables(both_out, cube) == (1, 2)


# ------------------------------------------------------------------- kernel

def test_kernel_zero_distance_is_tau():
    cfg = GPConfig(theta=0.1, tau_gp=2.3)
    x = np.array([0.4, -1.0])
    assert sq_exp_kernel(x, x, np.array([1.0, 2.0]), cfg) == pytest.approx(2.3)


def test_kernel_one_range_apart():
    cfg = GPConfig(theta=0.1, tau_gp=1.7)
    v = sq_exp_kernel(np.array([0.0]), np.array([3.0]), np.array([3.0]), cfg)
    assert v == pytest.approx(1.7 * 0.951229424500714, rel=1e-12)


def test_kernel_monotone_decay():
    cfg = GPConfig(theta=0.1, tau_gp=1.0)
    d = np.array([2.0])
    k1 = sq_exp_kernel([0.0], [2.0], d, cfg)
    k5 = sq_exp_kernel([0.0], [10.0], d, cfg)
    k10 = sq_exp_kernel([0.0], [20.0], d, cfg)
    assert k10 < k5 < k1 < 1.0


def test_gram_matches_pairwise_kernel():
    gen = np.random.default_rng(1)
    A = gen.normal(size=(6, 2))
    B = gen.normal(size=(4, 2))
    ranges = np.array([0.7, 1.3])
    cfg = GPConfig(theta=0.2, tau_gp=0.9)
    G = _gram(A, B, ranges, cfg)
    for i in range(6):
        for j in range(4):
            assert G[i, j] == pytest.approx(sq_exp_kernel(A[i], B[j], ranges, cfg), rel=1e-12)


# ----------------------------------------------------------- gp_conditional

def dense_conditional_oracle(Xte, Xtr, rtr, mu, noise_diag, ranges, theta, tau_gp):
    """Brute force: form the full joint covariance elementwise, partition, and
    condition with a generic linear solve."""
    P = np.vstack([Xte, Xtr])
    m = P.shape[0]
    K = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            K[i, j] = tau_gp * math.exp(-theta * float(np.sum(((P[i] - P[j]) / ranges) ** 2)) / 2)
    nte = Xte.shape[0]
    K[nte:, nte:] += np.diag(noise_diag)
    See, Set, Stt = K[:nte, :nte], K[:nte, nte:], K[nte:, nte:]
    mean = mu + Set @ np.linalg.solve(Stt, np.asarray(rtr) - mu)
    cov = See - Set @ np.linalg.solve(Stt, Set.T)
    return mean, cov


def test_gp_conditional_empty_test_set():
    cfg = GPConfig(tau_gp=1.0)
    mean, cov = gp_conditional(np.empty((0, 1)), np.array([[0.0]]), [1.0], 0.0, 1.0, 5, cfg)
    assert mean.shape == (0,) and cov.shape == (0, 0)


def test_gp_conditional_matches_dense_oracle():
    cfg = GPConfig(theta=0.1, tau_gp=1.0, jitter=0.0)
    Xtr = np.array([[0.0], [1.0], [2.5]])
    Xte = np.array([[4.0], [5.0]])
    rtr = np.array([0.5, -0.2, 0.9])
    mu, s2_over_L = 0.3, 0.25
    mean, cov = gp_conditional(Xte, Xtr, rtr, mu, s2_over_L * 4, 4, cfg, ranges=np.array([2.5]))
    om, oc = dense_conditional_oracle(Xte, Xtr, rtr, mu, np.full(3, s2_over_L),
                                      np.array([2.5]), 0.1, 1.0)
    np.testing.assert_allclose(mean, om, atol=1e-8)
    np.testing.assert_allclose(cov, oc, atol=1e-8)


def test_gp_conditional_random_instances_match_oracle():
    gen = np.random.default_rng(7)
    cfg_proto = dict(theta=0.1, jitter=0.0)
    for _ in range(40):
        k = int(gen.integers(1, 4))
        ntr = int(gen.integers(1, 9))
        nte = int(gen.integers(1, 5))
        tau_gp = float(gen.uniform(0.2, 3.0))
        cfg = GPConfig(tau_gp=tau_gp, **cfg_proto)
        Xtr = gen.normal(size=(ntr, k))
        Xte = gen.normal(size=(nte, k)) * 2.0
        rtr = gen.normal(size=ntr)
        mu = float(gen.normal())
        s2 = float(gen.uniform(0.1, 2.0))
        L = int(gen.integers(1, 30))
        ranges = gen.uniform(0.5, 2.0, size=k)
        mean, cov = gp_conditional(Xte, Xtr, rtr, mu, s2, L, cfg, ranges=ranges)
        om, oc = dense_conditional_oracle(Xte, Xtr, rtr, mu, np.full(ntr, s2 / L), ranges,
                                          cfg.theta, tau_gp)
        np.testing.assert_allclose(mean, om, atol=1e-8)
        np.testing.assert_allclose(cov, oc, atol=1e-8)


def test_gp_conditional_far_point_reverts_to_prior():
    cfg = GPConfig(theta=0.1, tau_gp=1.4)
    Xtr = np.linspace(0, 1, 8)[:, None]
    rtr = np.sin(np.arange(8.0))
    mu = 0.8
    mean, cov = gp_conditional(np.array([[1e9]]), Xtr, rtr, mu, 1.0, 10, cfg,
                               ranges=np.array([1.0]))
    assert abs(mean[0] - mu) < 1e-6 * (abs(mu) + 1)
    assert abs(cov[0, 0] - 1.4) < 1e-6


def test_gp_conditional_variance_shrinkage():
    gen = np.random.default_rng(3)
    for _ in range(100):
        k = int(gen.integers(1, 3))
        Xtr = gen.normal(size=(int(gen.integers(1, 12)), k))
        Xte = gen.normal(size=(int(gen.integers(1, 6)), k))
        cfg = GPConfig(theta=0.1, tau_gp=float(gen.uniform(0.1, 2.0)))
        ranges = gen.uniform(0.5, 2.0, size=k)
        _, cov = gp_conditional(Xte, Xtr, gen.normal(size=Xtr.shape[0]), 0.0, 1.0, 10, cfg,
                                ranges=ranges)
        assert np.all(np.diag(cov) <= cfg.tau_gp + 1e-10)


def test_kernel_gram_psd():
    gen = np.random.default_rng(4)
    for _ in range(100):
        m = int(gen.integers(2, 100))
        k = int(gen.integers(1, 4))
        A = gen.normal(size=(m, k))
        cfg = GPConfig(theta=0.1, tau_gp=float(gen.uniform(0.1, 3.0)))
        G = _gram(A, A, gen.uniform(0.5, 2.0, size=k), cfg)
        w = np.linalg.eigvalsh(G)
        assert w.min() >= -1e-8 * cfg.tau_gp


def test_chol_jitter_escalation_and_failure():
    M = np.ones((3, 3))  # rank-1, needs jitter
    L = _chol_with_jitter(M, 1.0, 1e-8)
    assert np.all(np.isfinite(L))
    bad = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite beyond jitter cap
    with pytest.raises(GPSingularError):
        _chol_with_jitter(bad, 1e-12, 1e-8)


# -------------------------------------------------------- predict_from_root

def _single_leaf_setup():
    tree = Tree.single_leaf(0.6)
    Xtr = Dataset(np.arange(5.0)[:, None])
    Xte = Dataset(np.array([[10.0]]))
    resid = np.array([0.5, 0.1, -0.3, 0.8, 0.2])
    cfg = GPConfig(theta=0.1, tau_gp=1.0, hypercube_coverage=1.0)
    return tree, Xtr, Xte, resid, cfg


def test_pfr_single_leaf_exterior_draw_moments():
    tree, Xtr, Xte, resid, cfg = _single_leaf_setup()
    draws = np.empty(10_000)
    for k in range(draws.size):
        res = predict_from_root(tree, resid, Xtr, Xte, 1.0, 4, cfg, RngStream(50, k))
        assert res.gp_mask[0]
        draws[k] = res.rte[0]
    mean, cov = gp_conditional(Xte.X, Xtr.X, resid, 0.6, 1.0, 4, cfg,
                               ranges=np.array([4.0]))
    sd = math.sqrt(cov[0, 0])
    assert abs(draws.mean() - mean[0]) < 3 * sd / math.sqrt(draws.size)
    assert abs(draws.var() - cov[0, 0]) < 3 * cov[0, 0] * math.sqrt(2.0 / (draws.size - 1))


def test_pfr_prior_reversion_far_away():
    tree, Xtr, _, resid, cfg = _single_leaf_setup()
    far = Dataset(np.array([[4.0 + 1e6 * 4.0]]))
    draws = np.empty(10_000)
    for k in range(draws.size):
        res = predict_from_root(tree, resid, Xtr, far, 1.0, 4, cfg, RngStream(51, k))
        draws[k] = res.rte[0]
    # distribution reverts to N(leaf mean, tau_gp)
    assert abs(draws.mean() - 0.6) < 3 * math.sqrt(1.0 / draws.size)
    assert draws.var() == pytest.approx(1.0, rel=0.06)


def test_pfr_interior_equals_constants_bitwise():
    gen = np.random.default_rng(8)
    X = gen.normal(size=(60, 2))
    data = Dataset(X, X[:, 0] + gen.normal(size=60, scale=0.2))
    draws = fit(data, FitConfig(num_trees=4, num_sweeps=10, burn_in=2), RngStream(60))
    tree = draws.forests[-1][0]
    resid = gen.normal(size=60)
    cfg = GPConfig(theta=0.1, tau_gp=0.5, hypercube_coverage=1.0)
    res = predict_from_root(tree, resid, data, Dataset(X), 1.0, 4, cfg, RngStream(61))
    np.testing.assert_array_equal(res.rte, tree.predict(X))
    assert not res.gp_mask.any()
    np.testing.assert_array_equal(res.rtr, tree.predict(X))


def test_pfr_nonsplit_variable_is_not_exterior():
    # tree splits on vars 0 and 1 only; a test row wild in var 7 stays interior
    tree = Tree(var=[0, -1, 1, -1, -1], cut=[0.0, 0.0, 0.0, 0.0, 0.0],
                left=[2, -1, 3, -1, -1], right=[1, -1, 4, -1, -1],
                mu=[np.nan, 1.0, np.nan, 2.0, 3.0], depth=[0, 1, 1, 2, 2])
    gen = np.random.default_rng(9)
    Xtr = gen.normal(size=(200, 8))
    xte = np.zeros((1, 8))
    xte[0, 0] = -0.5  # interior on split vars
    xte[0, 1] = -0.5
    xte[0, 7] = 1e6   # exterior on a variable this tree never split on
    cfg = GPConfig(theta=0.1, tau_gp=1.0, hypercube_coverage=1.0)
    res = predict_from_root(tree, gen.normal(size=200), Dataset(Xtr), Dataset(xte),
                            1.0, 4, cfg, RngStream(62))
    assert not res.gp_mask[0]
    assert res.rte[0] == 2.0


def test_pfr_gp_rows_differ_only_when_exterior():
    gen = np.random.default_rng(10)
    X = gen.normal(size=(80, 3))
    data = Dataset(X, X[:, 0] ** 2 + gen.normal(size=80, scale=0.3))
    fitted = fit(data, FitConfig(num_trees=3, num_sweeps=8, burn_in=2), RngStream(63))
    Xte = Dataset(gen.normal(size=(40, 3)) * 2.0)
    cfg = GPConfig(theta=0.1, tau_gp=0.7)
    for s in (5, 6, 7):
        for tree in fitted.forests[s]:
            res = predict_from_root(tree, gen.normal(size=80), data, Xte, 1.0, 3, cfg,
                                    RngStream(64, s))
            const = tree.predict(Xte.X)
            differs = res.rte != const
            assert np.all(res.gp_mask[differs])


# ----------------------------------------------------------------- predict_gp

def test_predict_gp_interior_degenerates_to_predict():
    gen = np.random.default_rng(11)
    X = gen.normal(size=(80, 3))
    data = Dataset(X, np.sin(X[:, 0]) + gen.normal(size=80, scale=0.3))
    draws = fit(data, FitConfig(num_trees=5, num_sweeps=12, burn_in=3), RngStream(70))
    Xte = Dataset(X[::3])  # training rows: inside every leaf cube at coverage 1
    cfg = GPConfig(theta=0.1, hypercube_coverage=1.0)
    plain = predict(draws, Xte, 0.1, RngStream(71))
    gp = predict_gp(draws, data, Xte, 0.1, cfg, RngStream(71))
    np.testing.assert_array_equal(plain.draws, gp.draws)
    np.testing.assert_array_equal(plain.mean, gp.mean)
    np.testing.assert_array_equal(plain.lo, gp.lo)
    np.testing.assert_array_equal(plain.hi, gp.hi)
    assert np.all(gp.exterior_frac == 0.0)


def test_predict_gp_fingerprint_mismatch_is_hard_error():
    gen = np.random.default_rng(12)
    X = gen.normal(size=(40, 2))
    data = Dataset(X, X[:, 0])
    draws = fit(data, FitConfig(num_trees=3, num_sweeps=8, burn_in=2), RngStream(72))
    other = Dataset(X, X[:, 0] + 1.0)
    with pytest.raises(DataError, match="fingerprint"):
        predict_gp(draws, other, Dataset(X[:4]), 0.1, GPConfig(), RngStream(73))


def test_predict_gp_noiseless_flag():
    gen = np.random.default_rng(13)
    X = gen.normal(size=(50, 2))
    data = Dataset(X, X[:, 0] + 0.1 * gen.normal(size=50))
    draws = fit(data, FitConfig(num_trees=4, num_sweeps=10, burn_in=2), RngStream(74))
    Xte = Dataset(gen.normal(size=(10, 2)))
    noisy = predict_gp(draws, data, Xte, 0.1, GPConfig(), RngStream(75))
    clean = predict_gp(draws, data, Xte, 0.1, GPConfig(), RngStream(75), include_noise=False)
    np.testing.assert_array_equal(noisy.mean, clean.mean)
    assert np.mean(noisy.hi - noisy.lo) > np.mean(clean.hi - clean.lo)


def test_predict_gp_widths_grow_with_distance_1d():
    gen = np.random.default_rng(14)
    x = np.sort(gen.uniform(-2 * np.pi, 2 * np.pi, size=150))
    y = np.sin(x) + 0.1 * gen.normal(size=150)
    data = Dataset(x[:, None], y)
    draws = fit(data, FitConfig(num_trees=20, num_sweeps=100, burn_in=15), RngStream(76))
    xmax = x.max()
    Xte = Dataset(np.array([[np.median(x)], [xmax + 1.0], [xmax + 3.0]]))
    res = predict_gp(draws, data, Xte, 0.1, GPConfig(), RngStream(77))
    w = res.hi - res.lo
    assert w[2] > w[1] > w[0]
