"""Single regression trees grown from the root by integrated-likelihood sampling.

A tree is regrown from scratch each time it is updated: at every node the
grower enumerates candidate cutpoints, scores each by the closed-form marginal
likelihood of its two children, adds a stop-here option weighted by the depth
prior, and samples one option proportionally.  Leaf means are drawn afterwards
from their conjugate normal posteriors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError
from .rng import RngStream


@dataclass(frozen=True)
class TreePrior:
    """Regularization prior and growth limits for a single tree.

    ``alpha * (1 + depth) ** -beta`` is the prior probability that a node at
    the given depth splits; ``tau`` is the prior variance of leaf means.
    ``n_min`` is the smallest node that will attempt a split and
    ``min_child`` the smallest child a split may create.
    """

    alpha: float = 0.95
    beta: float = 2.0
    tau: float | None = None
    max_depth: int = 250
    n_min: int = 20
    n_cutpoints: int = 100
    min_child: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.tau is not None and self.tau <= 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.n_min < 1:
            raise ValueError(f"n_min must be >= 1, got {self.n_min}")
        if self.n_cutpoints < 1 or self.max_depth < 0 or self.min_child < 1:
            raise ValueError("invalid tree prior limits")


@dataclass(frozen=True)
class SuffStats:
    """Residual count and sum inside one node."""

    n: int
    s: float


def split_prob(depth: int, prior: TreePrior) -> float:
    """Prior probability that a node at ``depth`` splits."""
    return prior.alpha * (1.0 + depth) ** (-prior.beta)


def _log_marginal_ws(W, S, tau):
    """Data-dependent log integrated likelihood from precision-weighted stats.

    ``W`` is the summed per-row precision and ``S`` the precision-weighted
    residual sum; the homoskedastic case has W = n / sigma2, S = s / sigma2.
    """
    tw = tau * W
    return -0.5 * np.log1p(tw) + tau * S * S / (2.0 * (1.0 + tw))


def log_marginal(node: SuffStats, sigma2: float, tau: float) -> float:
    """Log integrated likelihood of one node, up to residual-only constants.

    Equals ``0.5 * log(sigma2 / (sigma2 + tau n)) + tau s^2 /
    (2 sigma2 (sigma2 + tau n))`` for node stats (n, s).
    """
    return float(_log_marginal_ws(node.n / sigma2, node.s / sigma2, tau))


class Tree:
    """A fitted binary regression tree stored as parallel node arrays.

    ``var[i] == -1`` marks node i as a leaf; internal nodes route a row left
    iff ``x[var] <= cut``.  ``mu`` is NaN until leaf parameters are sampled.
    """

    __slots__ = ("var", "cut", "left", "right", "mu", "depth")

    def __init__(self, var, cut, left, right, mu, depth):
        self.var = np.asarray(var, dtype=np.int32)
        self.cut = np.asarray(cut, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.mu = np.asarray(mu, dtype=float)
        self.depth = np.asarray(depth, dtype=np.int32)

    @property
    def n_nodes(self) -> int:
        return self.var.shape[0]

    @property
    def leaf_node_ids(self) -> np.ndarray:
        return np.flatnonzero(self.var < 0)

    @property
    def n_leaves(self) -> int:
        return int((self.var < 0).sum())

    def leaf_ids(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        out = np.empty(n, dtype=np.int64)
        stack = [(0, np.arange(n))]
        while stack:
            node, rows = stack.pop()
            if self.var[node] < 0:
                out[rows] = node
                continue
            go_left = X[rows, self.var[node]] <= self.cut[node]
            stack.append((int(self.left[node]), rows[go_left]))
            stack.append((int(self.right[node]), rows[~go_left]))
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf mean for each row of ``X``."""
        return self.mu[self.leaf_ids(X)]

    def predict_row(self, x) -> float:
        node = 0
        x = np.asarray(x, dtype=float).ravel()
        while self.var[node] >= 0:
            node = int(self.left[node]) if x[self.var[node]] <= self.cut[node] else int(self.right[node])
        return float(self.mu[node])

    def with_mu(self, mu: np.ndarray) -> "Tree":
        return Tree(self.var, self.cut, self.left, self.right, mu, self.depth)

    def to_nodes(self) -> list[dict]:
        """JSON-ready node list."""
        nodes = []
        for i in range(self.n_nodes):
            if self.var[i] < 0:
                mu = float(self.mu[i])
                nodes.append({"id": i, "kind": "leaf", "mu": None if math.isnan(mu) else mu,
                              "depth": int(self.depth[i])})
            else:
                nodes.append({"id": i, "kind": "split", "var": int(self.var[i]),
                              "cut": float(self.cut[i]), "left": int(self.left[i]),
                              "right": int(self.right[i]), "depth": int(self.depth[i])})
        return nodes

    @classmethod
    def from_nodes(cls, nodes: list[dict]) -> "Tree":
        n = len(nodes)
        var = np.full(n, -1, dtype=np.int32)
        cut = np.zeros(n)
        left = np.full(n, -1, dtype=np.int32)
        right = np.full(n, -1, dtype=np.int32)
        mu = np.full(n, np.nan)
        depth = np.zeros(n, dtype=np.int32)
        for nd in nodes:
            i = nd["id"]
            depth[i] = nd["depth"]
            if nd["kind"] == "split":
                var[i] = nd["var"]
                cut[i] = nd["cut"]
                left[i] = nd["left"]
                right[i] = nd["right"]
            else:
                mu[i] = np.nan if nd.get("mu") is None else float(nd["mu"])
        return cls(var, cut, left, right, mu, depth)

    @classmethod
    def single_leaf(cls, mu: float = np.nan) -> "Tree":
        return cls([-1], [0.0], [-1], [-1], [mu], [0])


class _TreeBuilder:
    def __init__(self):
        self.var: list[int] = []
        self.cut: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.depth: list[int] = []

    def add(self, depth: int) -> int:
        self.var.append(-1)
        self.cut.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.depth.append(depth)
        return len(self.var) - 1

    def finish(self) -> Tree:
        n = len(self.var)
        return Tree(self.var, self.cut, self.left, self.right, np.full(n, np.nan), self.depth)


def _candidate_positions(m: int, n_cutpoints: int) -> np.ndarray:
    """Evenly spaced left-count positions in 1..m-1 (before tie snapping)."""
    k = min(n_cutpoints, m - 1)
    if k <= 0:
        return np.empty(0, dtype=np.intp)
    return np.unique(np.round(np.linspace(1, m - 1, k)).astype(np.intp))


def _grow_weighted(data: Dataset, wrow: np.ndarray, srow: np.ndarray, prior: TreePrior,
                   rng: RngStream, arm: np.ndarray | None = None, n_min_arm: int = 0) -> Tree:
    """Shared grower over precision-weighted residual stats.

    ``wrow``/``srow`` are per-row precision and precision-weighted residual
    contributions.  When ``arm`` is given, every candidate split must leave at
    least ``n_min_arm`` rows of each arm in both children.
    """
    Xc = np.ascontiguousarray(data.X.T)
    tau = prior.tau
    if tau is None or tau <= 0.0:
        raise ValueError("prior.tau must be set and positive to grow")
    gen = rng.generator
    builder = _TreeBuilder()
    p = data.p

    def grow(rows_sorted: np.ndarray, depth: int) -> int:
        node = builder.add(depth)
        m = rows_sorted.shape[1]
        if m < prior.n_min or depth >= prior.max_depth or m < 2:
            return node

        node_vals = np.take_along_axis(Xc, rows_sorted, axis=1)
        sw = srow[rows_sorted]
        ww = wrow[rows_sorted]
        cum_s = np.cumsum(sw, axis=1)
        cum_w = np.cumsum(ww, axis=1)
        S_tot = cum_s[0, -1]
        W_tot = cum_w[0, -1]

        ks = _candidate_positions(m, prior.n_cutpoints)
        if ks.size == 0:
            return node
        cuts = node_vals[:, ks - 1]
        # Snap each grid position to the end of its tie run so the left count
        # matches the `x <= cut` routing rule exactly.
        lc = np.empty((p, ks.size), dtype=np.intp)
        for j in range(p):
            lc[j] = np.searchsorted(node_vals[j], cuts[j], side="right")

        valid = (lc >= prior.min_child) & (m - lc >= prior.min_child)
        valid[:, 1:] &= lc[:, 1:] != lc[:, :-1]
        if arm is not None and n_min_arm > 0:
            cum_z = np.cumsum(arm[rows_sorted], axis=1)
            z_tot = cum_z[0, -1]
            t_left = np.take_along_axis(cum_z, np.maximum(lc - 1, 0), axis=1)
            c_left = lc - t_left
            t_right = z_tot - t_left
            c_right = (m - lc) - t_right
            valid &= (t_left >= n_min_arm) & (c_left >= n_min_arm)
            valid &= (t_right >= n_min_arm) & (c_right >= n_min_arm)

        n_cand = int(valid.sum())
        if n_cand == 0:
            return node

        idx = np.maximum(lc - 1, 0)
        S_L = np.take_along_axis(cum_s, idx, axis=1)
        W_L = np.take_along_axis(cum_w, idx, axis=1)
        logw = _log_marginal_ws(W_L, S_L, tau) + _log_marginal_ws(W_tot - W_L, S_tot - S_L, tau)
        logw = np.where(valid, logw, -np.inf).ravel()

        p_split = split_prob(depth, prior)
        lm_node = _log_marginal_ws(W_tot, S_tot, tau)
        logw_stop = math.log(n_cand) + math.log1p(-p_split) - math.log(p_split) + lm_node

        keys = np.append(logw, logw_stop)
        u = gen.uniform(size=keys.size)
        keys = keys - np.log(-np.log(u))
        pick = int(np.argmax(keys))
        if pick == keys.size - 1:
            return node

        j, t = divmod(pick, ks.size)
        cut = float(cuts[j, t])
        n_left = int(lc[j, t])
        go_left = Xc[j][rows_sorted] <= cut
        left_sorted = rows_sorted[go_left].reshape(p, n_left)
        right_sorted = rows_sorted[~go_left].reshape(p, m - n_left)

        builder.var[node] = j
        builder.cut[node] = cut
        builder.left[node] = grow(left_sorted, depth + 1)
        builder.right[node] = grow(right_sorted, depth + 1)
        return node

    grow(data.sorted_idx, 0)
    return builder.finish()


def grow_from_root(resid: np.ndarray, data: Dataset, prior: TreePrior, sigma2: float,
                   rng: RngStream) -> Tree:
    """Sample one tree structure given partial residuals ``resid``.

    Leaf means are left unset; call :func:`sample_leaf_params` next.
    """
    resid = np.asarray(resid, dtype=float)
    if resid.shape[0] != data.n:
        raise DataError(f"residual length {resid.shape[0]} != n = {data.n}")
    if not np.all(np.isfinite(resid)):
        raise DataError("non-finite residuals")
    if sigma2 <= 0.0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    wrow = np.full(data.n, 1.0 / sigma2)
    srow = resid / sigma2
    return _grow_weighted(data, wrow, srow, prior, rng)


def _leaf_stats(tree: Tree, X: np.ndarray, wrow: np.ndarray, srow: np.ndarray):
    """Per-leaf (W, S) precision-weighted sufficient statistics."""
    leaf_nodes = tree.leaf_node_ids
    rank = np.full(tree.n_nodes, -1, dtype=np.intp)
    rank[leaf_nodes] = np.arange(leaf_nodes.size)
    lid = rank[tree.leaf_ids(X)]
    W = np.bincount(lid, weights=wrow, minlength=leaf_nodes.size)
    S = np.bincount(lid, weights=srow, minlength=leaf_nodes.size)
    return leaf_nodes, W, S


def _sample_leaf_params_weighted(tree: Tree, data: Dataset, wrow: np.ndarray, srow: np.ndarray,
                                 tau: float, rng: RngStream) -> Tree:
    leaf_nodes, W, S = _leaf_stats(tree, data.X, wrow, srow)
    post_var = tau / (1.0 + tau * W)
    post_mean = post_var * S
    z = rng.standard_normal(leaf_nodes.size)
    mu = np.full(tree.n_nodes, np.nan)
    mu[leaf_nodes] = post_mean + np.sqrt(post_var) * z
    return tree.with_mu(mu)


def sample_leaf_params(tree: Tree, resid: np.ndarray, data: Dataset, sigma2: float,
                       tau: float, rng: RngStream) -> Tree:
    """Draw each leaf mean from its conjugate posterior given ``resid``.

    A leaf with stats (n, s) receives a draw from
    ``N(tau s / (sigma2 + tau n), sigma2 tau / (sigma2 + tau n))``; an empty
    leaf falls back to the prior ``N(0, tau)``.
    """
    resid = np.asarray(resid, dtype=float)
    wrow = np.full(data.n, 1.0 / sigma2)
    srow = resid / sigma2
    return _sample_leaf_params_weighted(tree, data, wrow, srow, tau, rng)


def tree_predict(tree: Tree, x) -> float:
    """Leaf mean of the unique leaf that row ``x`` reaches."""
    return tree.predict_row(x)
