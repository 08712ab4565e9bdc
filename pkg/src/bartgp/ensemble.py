"""Additive tree-ensemble fitting, prediction, and serialization.

Fitting runs Bayesian backfitting sweeps: each sweep regrows every tree
against its partial residuals and then refreshes the noise variance from its
inverse-gamma full conditional.  All sweeps are stored; burn-in is discarded
only at prediction time, so the retained draws never depend on when the caller
decides to cut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as streams
from .data import Dataset
from .errors import DataError, ModelFormatError
from .intervals import Interval, empirical_interval_bounds
from .rng import RngStream
from .tree import Tree, TreePrior, grow_from_root, sample_leaf_params

SCHEMA_VERSION = 1
_VAR_FLOOR = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Ensemble size, sweep counts, and priors.

    ``sigma_b=None`` resolves at fit time so the prior mean of the noise
    variance matches the training variance; ``tree_prior.tau=None`` resolves
    to ``Var(y) / num_trees``.  ``y_center`` records the training mean that
    was subtracted before fitting.
    """

    num_trees: int = 20
    num_sweeps: int = 100
    burn_in: int = 15
    tree_prior: TreePrior = field(default_factory=TreePrior)
    sigma_a: float = 3.0
    sigma_b: float | None = None
    y_center: float = 0.0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError(f"num_trees must be >= 1, got {self.num_trees}")
        if not self.num_sweeps > self.burn_in >= 0:
            raise ValueError(
                f"need num_sweeps > burn_in >= 0, got {self.num_sweeps}, {self.burn_in}")
        if self.sigma_a <= 0.0 or (self.sigma_b is not None and self.sigma_b <= 0.0):
            raise ValueError("inverse-gamma prior parameters must be positive")


@dataclass(frozen=True)
class PosteriorDraws:
    """Stored forests and noise-variance draws from one fit."""

    forests: tuple[tuple[Tree, ...], ...]
    sigma2: np.ndarray
    config: FitConfig
    train_fingerprint: str

    def __post_init__(self):
        s2 = np.asarray(self.sigma2, dtype=float)
        if np.any(s2 <= 0.0):
            raise ValueError("all sigma2 draws must be positive")
        object.__setattr__(self, "sigma2", s2)
        L = self.config.num_trees
        for row in self.forests:
            if len(row) != L:
                raise ValueError(f"forest row with {len(row)} trees, expected {L}")

    @property
    def num_sweeps(self) -> int:
        return len(self.forests)

    @property
    def retained_sweeps(self) -> range:
        return range(self.config.burn_in, self.num_sweeps)


def resolve_config(config: FitConfig, y: np.ndarray) -> FitConfig:
    """Fill data-dependent defaults (tau, sigma_b, y_center) from y."""
    var_y = max(float(np.var(y)), _VAR_FLOOR)
    prior = config.tree_prior
    if prior.tau is None:
        prior = replace(prior, tau=var_y / config.num_trees)
    sigma_b = config.sigma_b
    if sigma_b is None:
        sigma_b = max((config.sigma_a - 1.0) * var_y, _VAR_FLOOR)
    return replace(config, tree_prior=prior, sigma_b=sigma_b, y_center=float(np.mean(y)))


def sample_sigma2(full_resid: np.ndarray, prior: tuple[float, float], rng: RngStream) -> float:
    """Draw the noise variance from inverse-Gamma(a + n/2, b + sum(r^2)/2)."""
    a, b = prior
    if a <= 0.0 or b <= 0.0:
        raise ValueError("inverse-gamma parameters must be positive")
    r = np.asarray(full_resid, dtype=float)
    shape = a + r.size / 2.0
    rate = b + 0.5 * float(r @ r)
    g = rng.gamma(shape, scale=1.0)
    return rate / float(g)


def fit(data: Dataset, config: FitConfig, rng: RngStream,
        _check_conservation: bool = False) -> PosteriorDraws:
    """Fit the additive ensemble by backfitting sweeps.

    Each tree update removes that tree's previous contribution from the model
    (giving its partial residuals), regrows it, samples its leaf means, and
    restores the full residual with the new contribution, which keeps
    ``r == y_centered - sum of tree fits`` an exact identity throughout.
    """
    if data.y is None:
        raise DataError("training data has no response")
    if data.n < 2:
        raise DataError(f"need at least 2 rows to fit, got {data.n}")
    cfg = resolve_config(config, data.y)
    L, S = cfg.num_trees, cfg.num_sweeps
    prior = cfg.tree_prior
    tau = prior.tau
    ab = (cfg.sigma_a, cfg.sigma_b)

    yc = data.y - cfg.y_center
    r = yc.copy()
    contrib = np.zeros((L, data.n))
    sigma2 = max(float(np.var(yc)), _VAR_FLOOR)

    forests: list[tuple[Tree, ...]] = []
    sigma2_draws = np.empty(S)
    for s in range(S):
        row: list[Tree] = []
        for l in range(L):
            partial = r + contrib[l]
            tree = grow_from_root(partial, data, prior, sigma2, rng.child(streams.GROW, s, l))
            tree = sample_leaf_params(tree, partial, data, sigma2, tau, rng.child(streams.LEAF, s, l))
            fitted = tree.predict(data.X)
            r = partial - fitted
            contrib[l] = fitted
            row.append(tree)
            if _check_conservation:
                drift = np.max(np.abs(r - (yc - contrib.sum(axis=0))))
                if drift > 1e-10 * max(1.0, float(np.max(np.abs(yc)))):
                    raise AssertionError(f"residual conservation violated: drift {drift}")
        sigma2 = sample_sigma2(r, ab, rng.child(streams.SIGMA, s))
        sigma2_draws[s] = sigma2
        forests.append(tuple(row))

    return PosteriorDraws(tuple(forests), sigma2_draws, cfg, data.fingerprint())


@dataclass(frozen=True)
class PredictResult:
    """Per-point posterior summaries plus the raw draw matrix.

    ``draws`` has one row per retained sweep and one column per test point;
    ``mean`` averages the noiseless sweep fits.
    """

    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    level: float
    draws: np.ndarray

    @property
    def intervals(self) -> list[Interval]:
        return [Interval(float(a), float(b), self.level) for a, b in zip(self.lo, self.hi)]


def _sweep_fits(draws: PosteriorDraws, X: np.ndarray) -> np.ndarray:
    """Noiseless forest fit per retained sweep (rows) and test point (cols)."""
    retained = draws.retained_sweeps
    out = np.empty((len(retained), X.shape[0]))
    for i, s in enumerate(retained):
        acc = np.zeros(X.shape[0])
        for tree in draws.forests[s]:
            acc += tree.predict(X)
        out[i] = acc + draws.config.y_center
    return out


def _noise_matrix(draws: PosteriorDraws, n_test: int, rng: RngStream) -> np.ndarray:
    """Observation noise per retained sweep, keyed by absolute sweep index."""
    retained = draws.retained_sweeps
    out = np.empty((len(retained), n_test))
    for i, s in enumerate(retained):
        z = rng.child(streams.NOISE, s).standard_normal(n_test)
        out[i] = np.sqrt(draws.sigma2[s]) * z
    return out


def predict(draws: PosteriorDraws, Xtest: Dataset, alpha: float, rng: RngStream) -> PredictResult:
    """Posterior-predictive summaries at the test points.

    Per retained sweep the forest fit gets observation noise
    ``N(0, sigma2_s)`` added, and intervals are order-statistic quantiles of
    those draws.
    """
    if Xtest.p != _forest_p(draws):
        raise DataError(f"test set has {Xtest.p} columns, model expects {_forest_p(draws)}")
    fhat = _sweep_fits(draws, Xtest.X)
    ydraws = fhat + _noise_matrix(draws, Xtest.n, rng)
    lo, hi = empirical_interval_bounds(ydraws, alpha)
    return PredictResult(fhat.mean(axis=0), lo, hi, 1.0 - alpha, ydraws)


def _forest_p(draws: PosteriorDraws) -> int:
    best = 0
    for row in draws.forests:
        for tree in row:
            if tree.var.size and tree.var.max() >= 0:
                best = max(best, int(tree.var.max()) + 1)
    return best if best > 0 else 1


def _config_to_json(cfg: FitConfig) -> dict:
    tp = cfg.tree_prior
    return {
        "num_trees": cfg.num_trees, "num_sweeps": cfg.num_sweeps, "burn_in": cfg.burn_in,
        "sigma_a": cfg.sigma_a, "sigma_b": cfg.sigma_b, "y_center": cfg.y_center,
        "tree_prior": {"alpha": tp.alpha, "beta": tp.beta, "tau": tp.tau,
                       "max_depth": tp.max_depth, "n_min": tp.n_min,
                       "n_cutpoints": tp.n_cutpoints, "min_child": tp.min_child},
    }


def _config_from_json(d: dict) -> FitConfig:
    tp = d["tree_prior"]
    return FitConfig(
        num_trees=d["num_trees"], num_sweeps=d["num_sweeps"], burn_in=d["burn_in"],
        tree_prior=TreePrior(**tp), sigma_a=d["sigma_a"], sigma_b=d["sigma_b"],
        y_center=d["y_center"])


def save(draws: PosteriorDraws, path) -> None:
    """Serialize a fitted model as schema-v1 JSON (full float precision)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "regression",
        "config": _config_to_json(draws.config),
        "sigma2": draws.sigma2.tolist(),
        "forests": [[t.to_nodes() for t in row] for row in draws.forests],
        "fingerprint": draws.train_fingerprint,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise ModelFormatError(f"cannot open model file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"model file {path} is not valid JSON: {e}") from None


def load(path) -> PosteriorDraws:
    """Load a model written by :func:`save`; bit-identical round trip."""
    doc = _load_json(path)
    return _posterior_from_doc(doc, path)


def _posterior_from_doc(doc: dict, path) -> PosteriorDraws:
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise ModelFormatError(
            f"model file {path} has schema_version {doc.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION}")
    if doc.get("kind") != "regression":
        raise ModelFormatError(f"model file {path} holds a {doc.get('kind')!r} model")
    try:
        forests = tuple(tuple(Tree.from_nodes(nodes) for nodes in row) for row in doc["forests"])
        return PosteriorDraws(forests, np.asarray(doc["sigma2"], dtype=float),
                              _config_from_json(doc["config"]), doc["fingerprint"])
    except (KeyError, TypeError, IndexError) as e:
        raise ModelFormatError(f"model file {path} is malformed: {e}") from None
