"""Deterministic, splittable random-number streams.

Every stochastic routine in this package draws from an :class:`RngStream`, a
thin wrapper around numpy's counter-based Philox generator keyed by a
``(seed, stream)`` pair.  The same pair always reproduces the same draw
sequence, and child streams are derived by hashing integer labels into the
stream id, so work can be scheduled in any order (or in parallel) without
changing any output.

Streams are single-owner: hand a child to each independent task instead of
sharing one generator.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Purpose labels used to derive child streams.  Keeping them in one place
# guarantees that unrelated draw sites never collide.
GROW = 0x01
LEAF = 0x02
SIGMA = 0x03
NOISE = 0x04
GP_SUBSAMPLE = 0x05
GP_DRAW = 0x06
FOLD = 0x07
DGP = 0x08
SCALAR = 0x09
PROPENSITY = 0x0A
GPX = 0x0B
CVSPLIT = 0x0C


def _splitmix64(x: int) -> int:
    """Finalizer of the splitmix64 generator; a cheap 64-bit mixing hash."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix(stream: int, labels: tuple[int, ...]) -> int:
    h = stream & _MASK64
    for k in labels:
        h = _splitmix64(h ^ _splitmix64(k & _MASK64))
    return h


class RngStream:
    """A (seed, stream)-keyed random stream with deterministic children.

    Parameters
    ----------
    seed : int
        64-bit master seed shared by a whole computation.
    stream : int
        64-bit stream id distinguishing independent draw sites.
    """

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._gen: np.random.Generator | None = None

    @property
    def generator(self) -> np.random.Generator:
        """The lazily constructed numpy generator for this stream."""
        if self._gen is None:
            key = np.array([self.seed, self.stream], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, *labels: int) -> "RngStream":
        """Derive an independent stream from integer labels.

        The same ``(seed, stream, labels)`` always yields the same child, so
        per-task children make parallel schedules reproducible.
        """
        return RngStream(self.seed, _mix(self.stream, labels))

    # Convenience passthroughs used throughout the package.
    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def gamma(self, shape, scale=1.0, size=None):
        return self.generator.gamma(shape, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)

    def permutation(self, x):
        return self.generator.permutation(x)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"
