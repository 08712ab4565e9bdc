"""Two-forest causal model with GP extrapolation into non-overlap regions.

The outcome model is ``y = a * m(x, pihat) + b_z * t(x) + eps`` with
arm-specific noise variances: a prognostic forest ``m`` fit on the features
plus an estimated propensity score, and a treatment forest ``t`` whose splits
are required to keep enough treated and control rows in every child.  The
treatment effect reported is ``(b1 - b0) * t(x)``.

For prediction, each treatment-tree leaf carries an overlap box: the
intersection of the treated and control covariate ranges.  Test points inside
it keep the leaf constant; test points outside it get a GP draw conditioned
only on overlap training residuals, so effects extrapolate from the region
where both arms were actually observed instead of following the single-arm
bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as streams
from .data import CausalDataset, Dataset
from .ensemble import FitConfig, fit as ensemble_fit, predict as ensemble_predict, sample_sigma2
from .errors import DataError, GPSingularError, ModelFormatError
from .gpx import (GPConfig, Hypercube, _draw_mvn, _kernel_geometry, gp_conditional, iter_leaves,
                  leaf_hypercube)
from .intervals import Interval, empirical_interval, empirical_interval_bounds
from .rng import RngStream
from .tree import Tree, TreePrior, _grow_weighted, _sample_leaf_params_weighted

SCHEMA_VERSION = 1
_VAR_FLOOR = 1e-10
_B_FLOOR = 1e-10

# Parameter values before the first sweep; predict-time replay relies on them.
A_INIT = 1.0
B0_INIT = -0.5
B1_INIT = 0.5


def _default_prognostic_prior() -> TreePrior:
    return TreePrior(alpha=0.95, beta=2.0, n_min=20)


def _default_treatment_prior() -> TreePrior:
    # Treatment trees are regularized hard: a noise-driven split manufactures
    # a spurious overlap boundary, which degrades effect estimates both with
    # and without GP extrapolation.  Real effect heterogeneity still forces
    # splits through this prior.
    return TreePrior(alpha=0.05, beta=3.0, n_min=20)


@dataclass(frozen=True)
class CausalConfig:
    """Forest sizes, priors, and the arm-balance split constraint.

    ``n_min_arm`` is the minimum number of treated AND control rows required
    in each child of a treatment-tree split, keeping treatment leaves
    anchored to data from both arms.  Leaf-variance priors left as ``None``
    resolve at fit time from the response variance.
    """

    num_prognostic_trees: int = 20
    num_treatment_trees: int = 20
    num_sweeps: int = 100
    burn_in: int = 15
    prognostic_prior: TreePrior = field(default_factory=_default_prognostic_prior)
    treatment_prior: TreePrior = field(default_factory=_default_treatment_prior)
    n_min_arm: int = 20
    sigma_a: float = 3.0
    sigma_b: float | None = None
    gp: GPConfig = field(default_factory=GPConfig)

    def __post_init__(self):
        if self.num_prognostic_trees < 1 or self.num_treatment_trees < 1:
            raise ValueError("need at least one tree in each forest")
        if not self.num_sweeps > self.burn_in >= 0:
            raise ValueError("need num_sweeps > burn_in >= 0")
        if self.n_min_arm < 1:
            raise ValueError(f"n_min_arm must be >= 1, got {self.n_min_arm}")


@dataclass(frozen=True)
class CausalDraws:
    """Stored per-sweep forests and scalar draws from one causal fit.

    ``train_pihat`` keeps the propensity scores the prognostic forest was fit
    with, so prediction replays condition on exactly the same features.
    """

    prognostic_forests: tuple[tuple[Tree, ...], ...]
    treatment_forests: tuple[tuple[Tree, ...], ...]
    a: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    sigma2_0: np.ndarray
    sigma2_1: np.ndarray
    config: CausalConfig
    y_center: float
    sigma2_init: float
    train_pihat: np.ndarray
    train_fingerprint: str

    def __post_init__(self):
        for name in ("a", "b0", "b1", "sigma2_0", "sigma2_1"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.sigma2_0 <= 0.0) or np.any(self.sigma2_1 <= 0.0):
            raise ValueError("variance draws must be positive")

    @property
    def num_sweeps(self) -> int:
        return len(self.treatment_forests)

    @property
    def retained_sweeps(self) -> range:
        return range(self.config.burn_in, self.num_sweeps)


@dataclass(frozen=True)
class OverlapRegion:
    """Treated/control covariate boxes of a leaf and their intersection.

    ``empty_dims`` flags dimensions where the boxes do not intersect (or an
    arm is absent altogether); any empty dimension makes the overlap region
    empty as a set.
    """

    vars: tuple[int, ...]
    b_t: Hypercube | None
    b_c: Hypercube | None
    lo_o: np.ndarray
    hi_o: np.ndarray
    empty_dims: np.ndarray

    @property
    def is_empty(self) -> bool:
        return bool(self.empty_dims.any())

    def contains(self, X: np.ndarray) -> np.ndarray:
        if self.is_empty:
            return np.zeros(np.asarray(X).shape[0], dtype=bool)
        sub = np.asarray(X, dtype=float)[:, list(self.vars)]
        return np.all((sub >= self.lo_o) & (sub <= self.hi_o), axis=1)

    @property
    def b_o(self) -> Hypercube | None:
        if self.is_empty:
            return None
        return Hypercube(self.vars, self.lo_o, self.hi_o)


def overlap_region(rows: np.ndarray, z: np.ndarray, coverage: float,
                   vars: tuple[int, ...] | None = None) -> OverlapRegion:
    """Per-arm quantile boxes of leaf rows and their dimension-wise intersection."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    z = np.asarray(z, dtype=float).ravel()
    if rows.shape[0] < 1:
        raise ValueError("leaf has no rows")
    if vars is None:
        vars = tuple(range(rows.shape[1]))
    vlist = tuple(int(v) for v in vars)
    k = len(vlist)
    treated, control = rows[z == 1.0], rows[z == 0.0]
    b_t = leaf_hypercube(treated, vlist, coverage) if treated.shape[0] else None
    b_c = leaf_hypercube(control, vlist, coverage) if control.shape[0] else None
    if b_t is None or b_c is None:
        inf = np.full(k, np.inf)
        return OverlapRegion(vlist, b_t, b_c, inf, -inf, np.ones(k, dtype=bool))
    lo_o = np.maximum(b_t.lo, b_c.lo)
    hi_o = np.minimum(b_t.hi, b_c.hi)
    return OverlapRegion(vlist, b_t, b_c, lo_o, hi_o, lo_o > hi_o)


def estimate_propensity(X: np.ndarray, z: np.ndarray, rng: RngStream) -> np.ndarray:
    """Propensity estimate: regression ensemble on the binary treatment.

    Posterior-mean in-sample predictions clamped to [0.025, 0.975]; any
    calibrated monotone estimate works here since the score only enters as a
    prognostic-forest feature.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.sum() < 1 or (1.0 - z).sum() < 1:
        raise DataError("need both treatment arms to estimate propensity")
    data = Dataset(X, z)
    cfg = FitConfig(num_trees=20, num_sweeps=50, burn_in=7)
    draws = ensemble_fit(data, cfg, rng.child(streams.PROPENSITY))
    pred = ensemble_predict(draws, Dataset(data.X), 0.5, rng.child(streams.PROPENSITY, 1))
    return np.clip(pred.mean, 0.025, 0.975)


def _resolve_config(cfg: CausalConfig, yc: np.ndarray) -> CausalConfig:
    var_y = max(float(np.var(yc)), _VAR_FLOOR)
    prog = cfg.prognostic_prior
    if prog.tau is None:
        prog = replace(prog, tau=0.6 * var_y / cfg.num_prognostic_trees)
    trt = cfg.treatment_prior
    if trt.tau is None:
        trt = replace(trt, tau=0.1 * var_y / cfg.num_treatment_trees)
    sigma_b = cfg.sigma_b
    if sigma_b is None:
        sigma_b = max((cfg.sigma_a - 1.0) * var_y, _VAR_FLOOR)
    return replace(cfg, prognostic_prior=prog, treatment_prior=trt, sigma_b=sigma_b)


def _safe_b(bvec: np.ndarray) -> np.ndarray:
    return np.where(np.abs(bvec) < _B_FLOOR, np.copysign(_B_FLOOR, bvec), bvec)


def fit_xbcf(data: CausalDataset, config: CausalConfig, rng: RngStream) -> CausalDraws:
    """Fit the two-forest causal model by backfitting sweeps.

    Per sweep: prognostic forest (on features + propensity), then the scale
    ``a``, then the treatment forest under the arm-balance constraint, then
    ``b0``/``b1``, then the arm variances.  Missing propensity scores are
    estimated first with :func:`estimate_propensity`.
    """
    if data.pihat is None:
        data = data.with_pihat(estimate_propensity(data.X, data.z, rng))
    cfg_in = config
    yc_mean = float(np.mean(data.y))
    yc = data.y - yc_mean
    cfg = _resolve_config(cfg_in, yc)
    Lm, Lt, S = cfg.num_prognostic_trees, cfg.num_treatment_trees, cfg.num_sweeps
    z = data.z
    n = data.n

    mu_data = Dataset(np.hstack([data.X, data.pihat[:, None]]),
                      col_kinds=data.col_kinds + ("continuous",))
    tau_data = Dataset(data.X, col_kinds=data.col_kinds)

    sigma2_init = max(float(np.var(yc)), _VAR_FLOOR)
    a, b0, b1 = A_INIT, B0_INIT, B1_INIT
    s0 = s1 = sigma2_init
    mu_fit = np.zeros(n)
    tau_fit = np.zeros(n)
    mu_contrib = np.zeros((Lm, n))
    tau_contrib = np.zeros((Lt, n))

    prog_forests: list[tuple[Tree, ...]] = []
    trt_forests: list[tuple[Tree, ...]] = []
    rec = {k: np.empty(S) for k in ("a", "b0", "b1", "s0", "s1")}
    ab = (cfg.sigma_a, cfg.sigma_b)

    for s in range(S):
        v = np.where(z == 1.0, s1, s0)
        bvec = np.where(z == 1.0, b1, b0)

        row_mu: list[Tree] = []
        wrow = (a * a) / v
        for l in range(Lm):
            u = yc - bvec * tau_fit - a * (mu_fit - mu_contrib[l])
            srow = a * u / v
            tree = _grow_weighted(mu_data, wrow, srow, cfg.prognostic_prior,
                                  rng.child(streams.GROW, 0, s, l))
            tree = _sample_leaf_params_weighted(tree, mu_data, wrow, srow,
                                                cfg.prognostic_prior.tau,
                                                rng.child(streams.LEAF, 0, s, l))
            g = tree.predict(mu_data.X)
            mu_fit += g - mu_contrib[l]
            mu_contrib[l] = g
            row_mu.append(tree)
        prog_forests.append(tuple(row_mu))

        t = yc - bvec * tau_fit
        prec = 1.0 + float(np.sum(mu_fit * mu_fit / v))
        mean = float(np.sum(mu_fit * t / v)) / prec
        a = mean + np.sqrt(1.0 / prec) * float(rng.child(streams.SCALAR, 0, s).standard_normal())

        row_t: list[Tree] = []
        wrow_t = (bvec * bvec) / v
        for l in range(Lt):
            u = yc - a * mu_fit - bvec * (tau_fit - tau_contrib[l])
            srow = bvec * u / v
            tree = _grow_weighted(tau_data, wrow_t, srow, cfg.treatment_prior,
                                  rng.child(streams.GROW, 1, s, l),
                                  arm=z, n_min_arm=cfg.n_min_arm)
            tree = _sample_leaf_params_weighted(tree, tau_data, wrow_t, srow,
                                                cfg.treatment_prior.tau,
                                                rng.child(streams.LEAF, 1, s, l))
            g = tree.predict(tau_data.X)
            tau_fit += g - tau_contrib[l]
            tau_contrib[l] = g
            row_t.append(tree)
        trt_forests.append(tuple(row_t))

        t = yc - a * mu_fit
        new_b = [b0, b1]
        for zval, svar in ((0, s0), (1, s1)):
            arm_rows = z == float(zval)
            prec = 2.0 + float(np.sum(tau_fit[arm_rows] ** 2)) / svar
            mean = float(np.sum(tau_fit[arm_rows] * t[arm_rows])) / svar / prec
            zdraw = float(rng.child(streams.SCALAR, 1 + zval, s).standard_normal())
            new_b[zval] = mean + np.sqrt(1.0 / prec) * zdraw
        b0, b1 = new_b
        bvec = np.where(z == 1.0, b1, b0)

        e = yc - a * mu_fit - bvec * tau_fit
        s0 = sample_sigma2(e[z == 0.0], ab, rng.child(streams.SIGMA, 0, s))
        s1 = sample_sigma2(e[z == 1.0], ab, rng.child(streams.SIGMA, 1, s))

        rec["a"][s], rec["b0"][s], rec["b1"][s] = a, b0, b1
        rec["s0"][s], rec["s1"][s] = s0, s1

    return CausalDraws(tuple(prog_forests), tuple(trt_forests), rec["a"], rec["b0"], rec["b1"],
                       rec["s0"], rec["s1"], cfg, yc_mean, sigma2_init,
                       data.pihat.copy(), data.fingerprint())


@dataclass(frozen=True)
class CateResult:
    """Per-point treatment-effect summaries and pooled average-effect summary."""

    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    level: float
    draws: np.ndarray
    ate_mean: float
    ate_interval: Interval

    @property
    def intervals(self) -> list[Interval]:
        return [Interval(float(a), float(b), self.level) for a, b in zip(self.lo, self.hi)]


@dataclass(frozen=True)
class GPCateResult(CateResult):
    """Treatment-effect summaries plus non-overlap extrapolation diagnostics."""

    nonoverlap_frac: np.ndarray = None  # type: ignore[assignment]
    n_gp_leaves: int = 0
    n_fallback: int = 0


def _summarize_cate(cate: np.ndarray, alpha: float) -> tuple:
    lo, hi = empirical_interval_bounds(cate, alpha)
    ate_draws = cate.mean(axis=1)
    return (cate.mean(axis=0), lo, hi, 1.0 - alpha, cate,
            float(ate_draws.mean()), empirical_interval(ate_draws, alpha))


def predict_cate(draws: CausalDraws, Xte: Dataset, alpha: float) -> CateResult:
    """Constant-leaf treatment-effect prediction: ``(b1-b0) * t(x)`` per sweep."""
    retained = draws.retained_sweeps
    cate = np.empty((len(retained), Xte.n))
    for i, s in enumerate(retained):
        acc = np.zeros(Xte.n)
        for tree in draws.treatment_forests[s]:
            acc += tree.predict(Xte.X)
        cate[i] = (draws.b1[s] - draws.b0[s]) * acc
    return CateResult(*_summarize_cate(cate, alpha))


@dataclass(frozen=True)
class OverlapGPRecord:
    """Instrumentation record of one non-overlap leaf GP call."""

    sweep: int
    tree_index: int
    leaf_id: int
    region: OverlapRegion
    gp_rows: np.ndarray
    test_rows: np.ndarray


def predict_cate_gp(draws: CausalDraws, train: CausalDataset, Xte: Dataset, alpha: float,
                    cfg: GPConfig | None = None, rng: RngStream | None = None,
                    collect: list | None = None) -> GPCateResult:
    """Treatment-effect prediction with GP extrapolation outside overlap.

    Replays the treatment forest's partial residuals from the stored draws.
    In each treatment-tree leaf, test rows inside the leaf's overlap box keep
    the leaf constant; rows outside it are drawn from a GP conditioned only
    on overlap training rows, with per-row noise ``sigma2_z / (Lm + Lt)``.
    Leaves with an empty overlap box or fewer than 2 overlap rows fall back
    to the constant and are counted.
    """
    if rng is None:
        raise ValueError("an RngStream is required")
    if train.fingerprint() != draws.train_fingerprint:
        raise DataError("training-data fingerprint does not match the fitted model")
    if Xte.p != train.p:
        raise DataError(f"test set has {Xte.p} columns, train has {train.p}")
    cfg = cfg if cfg is not None else draws.config.gp
    if cfg.tau_gp is None:
        n0 = float((train.z == 0.0).sum())
        n1 = float((train.z == 1.0).sum())
        pooled = (n0 * draws.sigma2_0[-1] + n1 * draws.sigma2_1[-1]) / (n0 + n1)
        cfg = replace(cfg, tau_gp=pooled / draws.config.num_treatment_trees)

    c = draws.config
    Lm, Lt, S, S0 = c.num_prognostic_trees, c.num_treatment_trees, c.num_sweeps, c.burn_in
    L_total = Lm + Lt
    z = train.z
    yc = train.y - draws.y_center
    Xmu = np.hstack([train.X, draws.train_pihat[:, None]])
    Xtr = train.X
    global_ranges = Xtr.max(axis=0) - Xtr.min(axis=0)

    tau_contrib = np.zeros((Lt, train.n))
    tau_fit = np.zeros(train.n)
    a_prev_b = (B0_INIT, B1_INIT)
    s_prev = (draws.sigma2_init, draws.sigma2_init)

    n_ret = S - S0
    cate = np.empty((n_ret, Xte.n))
    nonoverlap_count = np.zeros(Xte.n)
    n_gp = 0
    n_fallback = 0

    for s in range(S):
        mu_fit = np.zeros(train.n)
        for tree in draws.prognostic_forests[s]:
            mu_fit += tree.predict(Xmu)
        a_s = draws.a[s]
        bvec = np.where(z == 1.0, a_prev_b[1], a_prev_b[0])
        vvec = np.where(z == 1.0, s_prev[1], s_prev[0])
        # Noise on the effect-scale residuals u/b_z: variance sigma2_z/b_z^2,
        # shared equally across all prognostic + treatment trees.
        bsafe = _safe_b(bvec)
        noise_row = vvec / (bsafe * bsafe * L_total)
        gp_on = s >= S0

        te_acc = np.zeros(Xte.n)
        for l in range(Lt):
            tree = draws.treatment_forests[s][l]
            u = yc - a_s * mu_fit - bvec * (tau_fit - tau_contrib[l])
            if gp_on:
                r_leaf = u / _safe_b(bvec)
                fitted, rte = _pfr_overlap(tree, r_leaf, Xtr, Xte.X, z, noise_row, cfg,
                                           global_ranges, rng.child(streams.GPX, s, l),
                                           s, l, nonoverlap_count, collect)
                n_gp += rte[1]
                n_fallback += rte[2]
                te_acc += rte[0]
            else:
                fitted = tree.predict(Xtr)
            tau_fit += fitted - tau_contrib[l]
            tau_contrib[l] = fitted
        if gp_on:
            cate[s - S0] = (draws.b1[s] - draws.b0[s]) * te_acc
        a_prev_b = (draws.b0[s], draws.b1[s])
        s_prev = (draws.sigma2_0[s], draws.sigma2_1[s])

    base = _summarize_cate(cate, alpha)
    return GPCateResult(*base, nonoverlap_frac=nonoverlap_count / (n_ret * Lt),
                        n_gp_leaves=n_gp, n_fallback=n_fallback)


def _pfr_overlap(tree: Tree, resid: np.ndarray, Xtr: np.ndarray, Xte: np.ndarray,
                 z: np.ndarray, noise_row: np.ndarray, cfg: GPConfig,
                 global_ranges: np.ndarray, rng: RngStream, sweep: int, tree_index: int,
                 nonoverlap_count: np.ndarray, collect: list | None):
    """Treatment-tree leaf handler: overlap box routing plus non-overlap GP."""
    rtr = np.empty(Xtr.shape[0])
    rte = np.empty(Xte.shape[0])
    n_gp = 0
    n_fallback = 0
    for leaf_id, tr, te, path in iter_leaves(tree, Xtr, Xte):
        mu = float(tree.mu[leaf_id])
        rtr[tr] = mu
        if te.size == 0:
            continue
        rte[te] = mu
        # Overlap geometry lives on the split variables; a root-only tree has
        # none, so its single cell is all-overlap and never extrapolates.
        if tr.size == 0 or not path:
            continue
        region = overlap_region(Xtr[tr], z[tr], cfg.hypercube_coverage, path)
        inside = region.contains(Xte[te])
        out_rows = te[~inside]
        if out_rows.size == 0:
            continue
        nonoverlap_count[out_rows] += 1.0
        overlap_tr = tr[region.contains(Xtr[tr])]
        if region.is_empty or overlap_tr.size < 2:
            n_fallback += 1
            continue
        if overlap_tr.size > cfg.subsample:
            pick = rng.child(streams.GP_SUBSAMPLE, leaf_id).choice(
                overlap_tr.size, size=cfg.subsample, replace=False)
            gp_rows = overlap_tr[np.sort(pick)]
        else:
            gp_rows = overlap_tr
        b_o = region.b_o
        active = tuple(v for i, v in enumerate(region.vars)
                       if ((Xte[out_rows][:, v] < region.lo_o[i])
                           | (Xte[out_rows][:, v] > region.hi_o[i])).any())
        keep, deltas = _kernel_geometry(b_o, active, global_ranges) if active else ([], np.empty(0))
        if collect is not None:
            collect.append(OverlapGPRecord(sweep, tree_index, leaf_id, region, gp_rows, out_rows))
        n_gp += 1
        try:
            mean, cov = gp_conditional(Xte[out_rows][:, keep], Xtr[gp_rows][:, keep],
                                       resid[gp_rows], mu, 1.0, 1, cfg, ranges=deltas,
                                       noise_diag=noise_row[gp_rows])
            rte[out_rows] = _draw_mvn(mean, cov, cfg.tau_gp, rng.child(streams.GP_DRAW, leaf_id))
        except GPSingularError:
            n_fallback += 1
            rte[out_rows] = mu
    return rtr, (rte, n_gp, n_fallback)


# ------------------------------------------------------------- serialization

def _tree_prior_json(tp: TreePrior) -> dict:
    return {"alpha": tp.alpha, "beta": tp.beta, "tau": tp.tau, "max_depth": tp.max_depth,
            "n_min": tp.n_min, "n_cutpoints": tp.n_cutpoints, "min_child": tp.min_child}


def _gp_config_json(g: GPConfig) -> dict:
    return {"theta": g.theta, "tau_gp": g.tau_gp, "subsample": g.subsample,
            "hypercube_coverage": g.hypercube_coverage, "jitter": g.jitter}


def save_causal(draws: CausalDraws, path) -> None:
    """Serialize a causal fit as schema-v1 JSON."""
    c = draws.config
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "causal",
        "config": {
            "num_prognostic_trees": c.num_prognostic_trees,
            "num_treatment_trees": c.num_treatment_trees,
            "num_sweeps": c.num_sweeps, "burn_in": c.burn_in,
            "prognostic_prior": _tree_prior_json(c.prognostic_prior),
            "treatment_prior": _tree_prior_json(c.treatment_prior),
            "n_min_arm": c.n_min_arm, "sigma_a": c.sigma_a, "sigma_b": c.sigma_b,
            "gp": _gp_config_json(c.gp),
        },
        "sweeps": {"a": draws.a.tolist(), "b0": draws.b0.tolist(), "b1": draws.b1.tolist(),
                   "sigma2_0": draws.sigma2_0.tolist(), "sigma2_1": draws.sigma2_1.tolist()},
        "y_center": draws.y_center,
        "sigma2_init": draws.sigma2_init,
        "train_pihat": draws.train_pihat.tolist(),
        "prognostic_forests": [[t.to_nodes() for t in row] for row in draws.prognostic_forests],
        "treatment_forests": [[t.to_nodes() for t in row] for row in draws.treatment_forests],
        "fingerprint": draws.train_fingerprint,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_causal(path) -> CausalDraws:
    """Load a causal model written by :func:`save_causal`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ModelFormatError(f"cannot open model file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model file {path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelFormatError(f"model file {path} has schema_version "
                               f"{doc.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    if doc.get("kind") != "causal":
        raise ModelFormatError(f"model file {path} holds a {doc.get('kind')!r} model")
    try:
        cj = doc["config"]
        cfg = CausalConfig(
            num_prognostic_trees=cj["num_prognostic_trees"],
            num_treatment_trees=cj["num_treatment_trees"],
            num_sweeps=cj["num_sweeps"], burn_in=cj["burn_in"],
            prognostic_prior=TreePrior(**cj["prognostic_prior"]),
            treatment_prior=TreePrior(**cj["treatment_prior"]),
            n_min_arm=cj["n_min_arm"], sigma_a=cj["sigma_a"], sigma_b=cj["sigma_b"],
            gp=GPConfig(**cj["gp"]),
        )
        sw = doc["sweeps"]
        return CausalDraws(
            tuple(tuple(Tree.from_nodes(nd) for nd in row) for row in doc["prognostic_forests"]),
            tuple(tuple(Tree.from_nodes(nd) for nd in row) for row in doc["treatment_forests"]),
            np.asarray(sw["a"]), np.asarray(sw["b0"]), np.asarray(sw["b1"]),
            np.asarray(sw["sigma2_0"]), np.asarray(sw["sigma2_1"]),
            cfg, doc["y_center"], doc["sigma2_init"],
            np.asarray(doc["train_pihat"], dtype=float), doc["fingerprint"])
    except (KeyError, TypeError, IndexError) as e:
        raise ModelFormatError(f"model file {path} is malformed: {e}") from None
