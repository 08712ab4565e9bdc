"""Jackknife+ and CV+ prediction intervals around any point regressor.

Both constructions wrap an opaque fit-then-predict procedure: the regressor
is refit with rows (or folds) held out, the held-out absolute residuals
calibrate the interval width, and the endpoints are order statistics of the
per-fold predictions shifted by those residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng as streams
from .data import Dataset
from .ensemble import FitConfig, fit as ensemble_fit, predict as ensemble_predict
from .errors import BartGPError, DataError
from .intervals import Interval
from .rng import RngStream


@dataclass(frozen=True)
class RegressorSpec:
    """An opaque seeded fit-then-predict procedure.

    ``fit_predict(train, test, rng)`` must return point predictions at the
    test rows and be deterministic given the rng.  Fold refits receive
    children of the master stream keyed by the smallest held-out row id, so
    leave-one-out and n-fold runs line up exactly.
    """

    name: str
    fit_predict: Callable[[Dataset, Dataset, RngStream], np.ndarray]


def ensemble_regressor(config: FitConfig | None = None, name: str = "xbart") -> RegressorSpec:
    """The package's tree ensemble as a conformal base regressor."""
    cfg = config if config is not None else FitConfig()

    def fit_predict(train: Dataset, test: Dataset, rng: RngStream) -> np.ndarray:
        draws = ensemble_fit(train, cfg, rng)
        return ensemble_predict(draws, test, 0.5, rng.child(streams.NOISE)).mean

    return RegressorSpec(name, fit_predict)


@dataclass(frozen=True)
class ConformalResult:
    """Per-test-point intervals and the averaged out-of-fold predictions."""

    lo: np.ndarray
    hi: np.ndarray
    level: float
    point: np.ndarray

    @property
    def intervals(self) -> list[Interval]:
        return [Interval(float(a), float(b), self.level) for a, b in zip(self.lo, self.hi)]


def _plus_endpoints(preds: np.ndarray, resid: np.ndarray, alpha: float):
    """Order-statistic endpoints of {pred_i -/+ R_i} at the plus-method ranks."""
    n = preds.shape[0]
    lo_rank = min(max(math.floor(alpha * (n + 1)), 1), n)
    hi_rank = min(max(math.ceil((1.0 - alpha) * (n + 1)), 1), n)
    lo_sorted = np.sort(preds - resid[:, None], axis=0)
    hi_sorted = np.sort(preds + resid[:, None], axis=0)
    return lo_sorted[lo_rank - 1], hi_sorted[hi_rank - 1]


def _refit(reg: RegressorSpec, data: Dataset, held: np.ndarray, Xte: Dataset,
           rng: RngStream) -> np.ndarray:
    keep = np.setdiff1d(np.arange(data.n), held)
    train = data.subset(keep)
    evalset = Dataset(np.vstack([data.X[held], Xte.X]), col_kinds=data.col_kinds)
    fold_id = int(held.min())
    try:
        preds = np.asarray(reg.fit_predict(train, evalset, rng.child(streams.FOLD, fold_id)),
                           dtype=float)
    except Exception as e:  # noqa: BLE001 - fold id context is the contract
        raise BartGPError(f"regressor {reg.name!r} failed on fold {fold_id}: {e}") from e
    if preds.shape[0] != held.size + Xte.n:
        raise BartGPError(f"regressor {reg.name!r} returned {preds.shape[0]} predictions "
                          f"for {held.size + Xte.n} rows on fold {fold_id}")
    return preds


def jackknife_plus(reg: RegressorSpec, data: Dataset, Xte: Dataset, alpha: float,
                   rng: RngStream) -> ConformalResult:
    """Leave-one-out plus intervals: refit without each row, calibrate on its
    held-out residual, and take order-statistic envelope endpoints."""
    if data.y is None:
        raise DataError("training data has no response")
    if data.n < 2:
        raise DataError(f"need n >= 2 for leave-one-out, got {data.n}")
    n = data.n
    preds = np.empty((n, Xte.n))
    resid = np.empty(n)
    for i in range(n):
        out = _refit(reg, data, np.array([i]), Xte, rng)
        resid[i] = abs(data.y[i] - out[0])
        preds[i] = out[1:]
    lo, hi = _plus_endpoints(preds, resid, alpha)
    return ConformalResult(lo, hi, 1.0 - alpha, preds.mean(axis=0))


def cv_fold_assignment(n: int, K: int, rng: RngStream) -> np.ndarray:
    """Fold label per row from a seeded shuffle, balanced to within one row."""
    perm = rng.child(streams.CVSPLIT).permutation(n)
    fold = np.empty(n, dtype=np.intp)
    fold[perm] = np.arange(n) % K
    return fold


def cv_plus(reg: RegressorSpec, data: Dataset, Xte: Dataset, K: int, alpha: float,
            rng: RngStream) -> ConformalResult:
    """K-fold plus intervals; with K = n this reduces exactly to Jackknife+."""
    if data.y is None:
        raise DataError("training data has no response")
    if not 2 <= K <= data.n:
        raise DataError(f"need 2 <= K <= n, got K={K}, n={data.n}")
    n = data.n
    fold = cv_fold_assignment(n, K, rng)
    preds = np.empty((n, Xte.n))
    resid = np.empty(n)
    for k in range(K):
        held = np.flatnonzero(fold == k)
        out = _refit(reg, data, held, Xte, rng)
        resid[held] = np.abs(data.y[held] - out[: held.size])
        preds[held] = out[held.size:]
    lo, hi = _plus_endpoints(preds, resid, alpha)
    return ConformalResult(lo, hi, 1.0 - alpha, preds.mean(axis=0))
