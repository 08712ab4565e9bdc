"""Order-statistic prediction intervals from Monte Carlo draws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Interval:
    """A two-sided prediction interval at confidence ``level``."""

    lo: float
    hi: float
    level: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    @property
    def length(self) -> float:
        return self.hi - self.lo


def _order_stat_indices(n: int, alpha: float) -> tuple[int, int]:
    """1-based ranks of the central ``1 - alpha`` order-statistic interval.

    Ranks are clamped to ``[1, n]``: for tiny samples the nominal formulas
    fall off the ends, and the widest available interval is the conservative
    choice.
    """
    lo_rank = math.floor(alpha / 2.0 * (n + 1))
    hi_rank = math.ceil((1.0 - alpha / 2.0) * (n + 1))
    return max(lo_rank, 1), min(hi_rank, n)


def empirical_interval(draws, alpha: float) -> Interval:
    """Central interval of Monte Carlo draws via order statistics.

    The lower endpoint is the ``floor(alpha/2 * (S+1))``-th smallest draw and
    the upper endpoint the ``ceil((1-alpha/2) * (S+1))``-th smallest, for S
    draws.

    Raises
    ------
    ValueError
        If ``draws`` is empty or ``alpha`` is outside (0, 1).
    """
    d = np.asarray(draws, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("no posterior draws")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    s = np.sort(d)
    lo_rank, hi_rank = _order_stat_indices(d.size, alpha)
    return Interval(lo=float(s[lo_rank - 1]), hi=float(s[hi_rank - 1]), level=1.0 - alpha)


def empirical_interval_bounds(draw_matrix: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`empirical_interval` endpoints over matrix columns.

    ``draw_matrix`` has one column per prediction point and one row per draw;
    returns ``(lo, hi)`` arrays, one entry per column.
    """
    m = np.asarray(draw_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] == 0:
        raise ValueError("no posterior draws")
    s = np.sort(m, axis=0)
    lo_rank, hi_rank = _order_stat_indices(m.shape[0], alpha)
    return s[lo_rank - 1].copy(), s[hi_rank - 1].copy()
