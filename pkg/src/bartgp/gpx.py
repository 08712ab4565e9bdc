"""Leaf-local Gaussian-process extrapolation for tree-ensemble predictions.

Interior test points keep the ordinary constant-leaf prediction.  A test
point that lands in a leaf but falls outside the range of that leaf's
training data (its hypercube) is instead predicted by a Gaussian process
conditioned on the leaf's partial residuals, so predictions revert smoothly
toward the leaf mean, and uncertainty grows, with distance from the data.
Exteriority is leaf-local: the same point may be exterior for some trees and
interior for others, and only variables actually split on along the leaf's
path can trigger extrapolation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import rng as streams
from .data import Dataset
from .ensemble import PosteriorDraws, PredictResult, _noise_matrix
from .errors import DataError, GPSingularError
from .intervals import empirical_interval_bounds
from .rng import RngStream
from .tree import Tree

_JITTER_CAP_REL = 1e-2


@dataclass(frozen=True)
class GPConfig:
    """Kernel and workspace settings for leaf GPs.

    ``tau_gp=None`` resolves at prediction time to the training-response
    variance divided by the number of trees.  ``jitter`` is the initial
    diagonal boost relative to ``tau_gp``; it escalates tenfold per retry up
    to ``1e-2 * tau_gp`` before a leaf is declared singular.
    """

    theta: float = 0.1
    tau_gp: float | None = None
    subsample: int = 100
    hypercube_coverage: float = 0.95
    jitter: float = 1e-8

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.tau_gp is not None and self.tau_gp <= 0.0:
            raise ValueError(f"tau_gp must be positive, got {self.tau_gp}")
        if self.subsample < 1:
            raise ValueError(f"subsample must be >= 1, got {self.subsample}")
        if not 0.0 < self.hypercube_coverage <= 1.0:
            raise ValueError(f"hypercube_coverage must be in (0, 1], got {self.hypercube_coverage}")
        if self.jitter < 0.0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")


@dataclass(frozen=True)
class Hypercube:
    """Per-variable [lo, hi] bounds over a designated variable subset."""

    vars: tuple[int, ...]
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if np.any(lo > hi):
            raise ValueError("hypercube has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "vars", tuple(int(v) for v in self.vars))

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, X: np.ndarray) -> np.ndarray:
        """Row mask: inside the cube on every stored dimension (bounds count)."""
        X = np.asarray(X, dtype=float)
        sub = X[:, list(self.vars)]
        return np.all((sub >= self.lo) & (sub <= self.hi), axis=1)


@dataclass(frozen=True)
class LeafGPContext:
    """Workspace snapshot of one extrapolating leaf, mainly for diagnostics."""

    leaf_id: int
    split_vars: tuple[int, ...]
    active_vars: tuple[int, ...]
    cube: Hypercube
    train_rows: np.ndarray
    mu: float


def leaf_hypercube(rows: np.ndarray, vars: tuple[int, ...], coverage: float) -> Hypercube:
    """Central ``coverage`` quantile box of the given rows over ``vars``.

    ``coverage=1`` gives the exact min/max range; otherwise the bounds are
    the linear-interpolated ``(1-coverage)/2`` and ``1-(1-coverage)/2``
    empirical quantiles, which keeps lone outliers from inflating the box.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] < 1:
        raise ValueError("need at least one row")
    vlist = list(vars)
    sub = rows[:, vlist]
    half_tail = (1.0 - coverage) / 2.0
    lo = np.quantile(sub, half_tail, axis=0)
    hi = np.quantile(sub, 1.0 - half_tail, axis=0)
    return Hypercube(tuple(vlist), lo, hi)


def active_variables(Xte_leaf: np.ndarray, cube: Hypercube) -> tuple[int, ...]:
    """Cube variables on which at least one test row lies strictly outside."""
    X = np.asarray(Xte_leaf, dtype=float)
    if X.shape[0] == 0:
        return ()
    sub = X[:, list(cube.vars)]
    out = (sub < cube.lo) | (sub > cube.hi)
    hit = out.any(axis=0)
    return tuple(v for v, h in zip(cube.vars, hit) if h)


def sq_exp_kernel(x, xp, ranges, cfg: GPConfig) -> float:
    """Squared-exponential kernel between two rows over active variables.

    ``tau_gp * exp(-theta * sum_i (x_i - x'_i)^2 / (2 delta_i^2))`` with
    ``delta`` the per-variable ranges; the sum runs over the supplied
    (already active-restricted) coordinates only.
    """
    x = np.asarray(x, dtype=float).ravel()
    xp = np.asarray(xp, dtype=float).ravel()
    d = np.asarray(ranges, dtype=float).ravel()
    if np.any(d <= 0.0):
        raise ValueError("kernel ranges must be positive")
    tau_gp = _require_tau(cfg)
    q = float(np.sum(((x - xp) / d) ** 2))
    return tau_gp * float(np.exp(-cfg.theta * q / 2.0))


def _require_tau(cfg: GPConfig) -> float:
    if cfg.tau_gp is None:
        raise ValueError("tau_gp is unresolved; supply it or predict through predict_gp")
    return cfg.tau_gp


def _gram(A: np.ndarray, B: np.ndarray, ranges: np.ndarray, cfg: GPConfig) -> np.ndarray:
    """Kernel Gram block between row sets already restricted to active vars."""
    tau_gp = _require_tau(cfg)
    if A.shape[1] == 0:
        return np.full((A.shape[0], B.shape[0]), tau_gp)
    As = A / ranges
    Bs = B / ranges
    sq = (As * As).sum(axis=1)[:, None] + (Bs * Bs).sum(axis=1)[None, :] - 2.0 * (As @ Bs.T)
    np.maximum(sq, 0.0, out=sq)
    return tau_gp * np.exp(-cfg.theta * sq / 2.0)


def _chol_with_jitter(M: np.ndarray, scale: float, start_rel: float):
    """Cholesky factor with escalating diagonal jitter; raises when exhausted."""
    jit = start_rel * scale
    bump = 0.0
    for _ in range(32):
        try:
            return scipy.linalg.cholesky(M + bump * np.eye(M.shape[0]), lower=True)
        except scipy.linalg.LinAlgError:
            bump = jit if bump == 0.0 else bump * 10.0
            if bump > _JITTER_CAP_REL * scale:
                break
    raise GPSingularError("gp-singular: covariance not positive definite after jitter escalation")


def gp_conditional(Xte: np.ndarray, Xtr: np.ndarray, rtr: np.ndarray, mu: float,
                   sigma2: float, L: int, cfg: GPConfig,
                   ranges: np.ndarray | None = None,
                   noise_diag: np.ndarray | None = None):
    """Conditional mean and covariance of exterior residuals given leaf data.

    The joint over (test, train) residuals is a GP with constant mean ``mu``
    and squared-exponential covariance; the training block gets
    ``sigma2 / L`` observation noise on its diagonal (or ``noise_diag`` when
    supplied).  Rows must already be restricted to the active variables.

    Raises :class:`GPSingularError` when the training covariance cannot be
    factored even after jitter escalation; callers fall back to the leaf
    constant.
    """
    Xte = np.atleast_2d(np.asarray(Xte, dtype=float))
    Xtr = np.atleast_2d(np.asarray(Xtr, dtype=float))
    rtr = np.asarray(rtr, dtype=float).ravel()
    if Xte.shape[0] == 0:
        return np.empty(0), np.empty((0, 0))
    if Xtr.shape[0] < 1:
        raise ValueError("need at least one training row")
    if ranges is None:
        span = Xtr.max(axis=0) - Xtr.min(axis=0)
        ranges = np.where(span > 0.0, span, 1.0)
    ranges = np.asarray(ranges, dtype=float)

    tau_gp = _require_tau(cfg)
    K_tt = _gram(Xtr, Xtr, ranges, cfg)
    if noise_diag is None:
        noise_diag = np.full(Xtr.shape[0], sigma2 / L)
    K_tt[np.diag_indices_from(K_tt)] += np.asarray(noise_diag, dtype=float)

    chol = _chol_with_jitter(K_tt, tau_gp, cfg.jitter)
    K_et = _gram(Xte, Xtr, ranges, cfg)
    K_ee = _gram(Xte, Xte, ranges, cfg)

    sol_r = scipy.linalg.cho_solve((chol, True), rtr - mu)
    sol_K = scipy.linalg.cho_solve((chol, True), K_et.T)
    mean = mu + K_et @ sol_r
    cov = K_ee - K_et @ sol_K
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def _draw_mvn(mean: np.ndarray, cov: np.ndarray, scale: float, rng: RngStream) -> np.ndarray:
    chol = _chol_with_jitter(cov, scale, 1e-12)
    return mean + chol @ rng.standard_normal(mean.shape[0])


def iter_leaves(tree: Tree, Xtr: np.ndarray, Xte: np.ndarray):
    """Co-partition train and test rows through the tree's split rules.

    Yields ``(leaf_id, train_rows, test_rows, path_vars)`` per leaf, where
    ``path_vars`` are the distinct split variables on the root-to-leaf path
    in first-use order.
    """
    stack = [(0, np.arange(Xtr.shape[0]), np.arange(Xte.shape[0]), ())]
    while stack:
        node, tr, te, path = stack.pop()
        if tree.var[node] < 0:
            yield node, tr, te, path
            continue
        v, c = int(tree.var[node]), float(tree.cut[node])
        new_path = path if v in path else path + (v,)
        tr_left = Xtr[tr, v] <= c
        te_left = Xte[te, v] <= c
        stack.append((int(tree.left[node]), tr[tr_left], te[te_left], new_path))
        stack.append((int(tree.right[node]), tr[~tr_left], te[~te_left], new_path))


@dataclass
class PFRResult:
    """Per-tree prediction with extrapolation diagnostics."""

    rtr: np.ndarray
    rte: np.ndarray
    gp_mask: np.ndarray
    n_gp_leaves: int = 0
    n_singular: int = 0


def _kernel_geometry(cube: Hypercube, active: tuple[int, ...], global_ranges: np.ndarray):
    """Kernel variables and length scales for a leaf, handling flat ranges.

    A zero cube width falls back to the variable's global training range; a
    variable flat in the whole training set is dropped from the kernel.
    """
    keep: list[int] = []
    deltas: list[float] = []
    pos = {v: i for i, v in enumerate(cube.vars)}
    for v in active:
        w = float(cube.widths[pos[v]])
        if w <= 0.0:
            w = float(global_ranges[v])
        if w > 0.0:
            keep.append(v)
            deltas.append(w)
    return keep, np.asarray(deltas)


def predict_from_root(tree: Tree, resid: np.ndarray, Xtr: Dataset, Xte: Dataset,
                      sigma2: float, L: int, cfg: GPConfig, rng: RngStream,
                      global_ranges: np.ndarray | None = None,
                      collect: list | None = None) -> PFRResult:
    """Predict one tree's residual contribution for training and test rows.

    Training rows and interior test rows get the leaf constant.  Exterior
    test rows get a draw from the leaf GP conditioned on (at most
    ``cfg.subsample``) leaf training residuals.  A singular leaf GP falls
    back to the constant and is counted in the result.
    """
    Xtr_X, Xte_X = Xtr.X, Xte.X
    if global_ranges is None:
        global_ranges = Xtr_X.max(axis=0) - Xtr_X.min(axis=0)
    rtr = np.empty(Xtr_X.shape[0])
    rte = np.empty(Xte_X.shape[0])
    gp_mask = np.zeros(Xte_X.shape[0], dtype=bool)
    n_gp = 0
    n_sing = 0

    for leaf_id, tr, te, path in iter_leaves(tree, Xtr_X, Xte_X):
        mu = float(tree.mu[leaf_id])
        rtr[tr] = mu
        if te.size == 0:
            continue
        rte[te] = mu
        if tr.size == 0:
            continue
        # A root-only tree has no split path; its cell is the whole covariate
        # space, so every variable is a candidate for extrapolation.
        cand = path if path else tuple(range(Xtr_X.shape[1]))
        cube = leaf_hypercube(Xtr_X[tr], cand, cfg.hypercube_coverage)
        active = active_variables(Xte_X[te], cube)
        if not active:
            continue

        te_sub = Xte_X[te][:, list(cube.vars)]
        ext_local = ((te_sub < cube.lo) | (te_sub > cube.hi)).any(axis=1)
        ext_rows = te[ext_local]
        if ext_rows.size == 0:
            continue

        if tr.size > cfg.subsample:
            pick = rng.child(streams.GP_SUBSAMPLE, leaf_id).choice(tr.size, size=cfg.subsample,
                                                                   replace=False)
            gp_rows = tr[np.sort(pick)]
        else:
            gp_rows = tr
        keep, deltas = _kernel_geometry(cube, active, global_ranges)
        if collect is not None:
            collect.append(LeafGPContext(leaf_id, cand, active, cube, gp_rows, mu))
        n_gp += 1
        try:
            mean, cov = gp_conditional(Xte_X[ext_rows][:, keep], Xtr_X[gp_rows][:, keep],
                                       resid[gp_rows], mu, sigma2, L, cfg, ranges=deltas)
            tau_gp = cfg.tau_gp if cfg.tau_gp is not None else 1.0
            rte[ext_rows] = _draw_mvn(mean, cov, tau_gp, rng.child(streams.GP_DRAW, leaf_id))
            gp_mask[ext_rows] = True
        except GPSingularError:
            n_sing += 1
            rte[ext_rows] = mu
    return PFRResult(rtr, rte, gp_mask, n_gp, n_sing)


@dataclass(frozen=True)
class GPPredictResult(PredictResult):
    """Prediction summaries plus extrapolation diagnostics.

    ``exterior_frac[i]`` is the fraction of retained (sweep, tree) pairs in
    which point i was GP-extrapolated; ``n_singular`` counts leaf GPs that
    fell back to the constant.
    """

    exterior_frac: np.ndarray = None  # type: ignore[assignment]
    n_gp_leaves: int = 0
    n_singular: int = 0


def resolve_gp_config(cfg: GPConfig, draws: PosteriorDraws, y: np.ndarray) -> GPConfig:
    """Fill ``tau_gp`` from the training response when left unset."""
    if cfg.tau_gp is not None:
        return cfg
    var_y = max(float(np.var(y)), 1e-10)
    return replace(cfg, tau_gp=var_y / draws.config.num_trees)


def predict_gp(draws: PosteriorDraws, Xtr: Dataset, Xte: Dataset, alpha: float,
               cfg: GPConfig, rng: RngStream, include_noise: bool = True) -> GPPredictResult:
    """Posterior-predictive summaries with leaf-local GP extrapolation.

    Replays the fit's backfitting residuals from the stored forests (an exact
    reconstruction, so nothing extra is serialized), swapping in GP draws for
    exterior test rows leaf by leaf.  When no test row is exterior anywhere,
    the output draw matrix equals :func:`bartgp.ensemble.predict`'s exactly
    under the same rng.

    ``include_noise=False`` gives intervals for the regression function
    instead of the noisy response.
    """
    if Xtr.y is None:
        raise DataError("training data has no response")
    if Xtr.fingerprint() != draws.train_fingerprint:
        raise DataError(
            "training-data fingerprint does not match the fitted model; "
            "GP extrapolation conditions on the original training data")
    if Xte.p != Xtr.p:
        raise DataError(f"test set has {Xte.p} columns, train has {Xtr.p}")
    cfg = resolve_gp_config(cfg, draws, Xtr.y)

    c = draws.config
    L, S, S0 = c.num_trees, c.num_sweeps, c.burn_in
    yc = Xtr.y - c.y_center
    r = yc.copy()
    contrib = np.zeros((L, Xtr.n))
    global_ranges = Xtr.X.max(axis=0) - Xtr.X.min(axis=0)

    n_ret = S - S0
    fhat_te = np.empty((n_ret, Xte.n))
    ext_count = np.zeros(Xte.n)
    n_gp = 0
    n_sing = 0

    for s in range(S):
        gp_on = s >= S0
        te_acc = np.zeros(Xte.n)
        for l in range(L):
            partial = r + contrib[l]
            tree = draws.forests[s][l]
            if gp_on:
                pfr = predict_from_root(tree, partial, Xtr, Xte, float(draws.sigma2[s]), L,
                                        cfg, rng.child(streams.GPX, s, l), global_ranges)
                te_acc += pfr.rte
                ext_count += pfr.gp_mask
                n_gp += pfr.n_gp_leaves
                n_sing += pfr.n_singular
                fitted = pfr.rtr
            else:
                fitted = tree.predict(Xtr.X)
            r = partial - fitted
            contrib[l] = fitted
        if gp_on:
            fhat_te[s - S0] = te_acc + c.y_center

    ydraws = fhat_te + _noise_matrix(draws, Xte.n, rng) if include_noise else fhat_te
    lo, hi = empirical_interval_bounds(ydraws, alpha)
    return GPPredictResult(fhat_te.mean(axis=0), lo, hi, 1.0 - alpha, ydraws,
                           exterior_frac=ext_count / (n_ret * L),
                           n_gp_leaves=n_gp, n_singular=n_sing)
