"""Feature-matrix containers and CSV input/output.

A :class:`Dataset` bundles the design matrix, an optional response, per-column
kind tags, and per-column sort permutations (the "sieve" indices used by the
tree grower).  Instances are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

CONTINUOUS = "continuous"
BINARY = "binary"
CATEGORICAL = "categorical-as-numeric"
_KINDS = (CONTINUOUS, BINARY, CATEGORICAL)


@dataclass(frozen=True)
class Dataset:
    """An n-by-p numeric feature matrix with optional response vector.

    ``sorted_idx[j]`` is a permutation of row indices that sorts column j
    ascending; the tree grower consumes it to enumerate cutpoints without
    re-sorting at every node.
    """

    X: np.ndarray
    y: np.ndarray | None = None
    col_kinds: tuple[str, ...] = ()
    sorted_idx: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        if X.ndim != 2:
            raise DataError(f"X must be 2-dimensional, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise DataError(f"need n >= 1 and p >= 1, got {n} x {p}")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite feature value at row {i}, column {j}")
        object.__setattr__(self, "X", X)

        if self.y is not None:
            y = np.ascontiguousarray(np.asarray(self.y, dtype=float)).ravel()
            if y.shape[0] != n:
                raise DataError(f"y has {y.shape[0]} entries for {n} rows")
            if not np.all(np.isfinite(y)):
                i = int(np.flatnonzero(~np.isfinite(y))[0])
                raise DataError(f"non-finite response value at row {i}")
            object.__setattr__(self, "y", y)

        kinds = tuple(self.col_kinds) if self.col_kinds else (CONTINUOUS,) * p
        if len(kinds) != p:
            raise DataError(f"{len(kinds)} column kinds for {p} columns")
        for k in kinds:
            if k not in _KINDS:
                raise DataError(f"unknown column kind {k!r}")
        object.__setattr__(self, "col_kinds", kinds)

        if self.sorted_idx is None:
            idx = np.argsort(X, axis=0, kind="stable").T.copy()
        else:
            idx = np.asarray(self.sorted_idx, dtype=np.intp)
        object.__setattr__(self, "sorted_idx", idx)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def fingerprint(self) -> str:
        """Stable content hash of the training data (features + response)."""
        h = hashlib.sha256()
        h.update(np.array(self.X.shape, dtype=np.int64).tobytes())
        h.update(self.X.tobytes())
        if self.y is not None:
            h.update(self.y.tobytes())
        return h.hexdigest()

    def subset(self, rows) -> "Dataset":
        """New Dataset restricted to ``rows`` (original row order preserved)."""
        rows = np.asarray(rows)
        y = self.y[rows] if self.y is not None else None
        return Dataset(self.X[rows], y, self.col_kinds)


@dataclass(frozen=True)
class CausalDataset:
    """Observational study data: features, binary treatment, response.

    ``pihat`` holds per-row estimated propensity scores; it may be left None
    at construction and filled in (via ``with_pihat``) before model fitting.
    """

    X: np.ndarray
    z: np.ndarray
    y: np.ndarray
    pihat: np.ndarray | None = None
    col_kinds: tuple[str, ...] = ()

    def __post_init__(self):
        ds = Dataset(self.X, self.y, self.col_kinds)
        object.__setattr__(self, "X", ds.X)
        object.__setattr__(self, "y", ds.y)
        object.__setattr__(self, "col_kinds", ds.col_kinds)
        z = np.ascontiguousarray(np.asarray(self.z, dtype=float)).ravel()
        if z.shape[0] != ds.n:
            raise DataError(f"z has {z.shape[0]} entries for {ds.n} rows")
        if not np.all((z == 0.0) | (z == 1.0)):
            raise DataError("treatment vector must be binary 0/1")
        if z.sum() < 1 or (1.0 - z).sum() < 1:
            raise DataError("need at least one treated and one control row")
        object.__setattr__(self, "z", z)
        if self.pihat is not None:
            pi = np.ascontiguousarray(np.asarray(self.pihat, dtype=float)).ravel()
            if pi.shape[0] != ds.n:
                raise DataError(f"pihat has {pi.shape[0]} entries for {ds.n} rows")
            if not np.all((pi >= 0.0) & (pi <= 1.0)):
                raise DataError("pihat must lie in [0, 1]")
            object.__setattr__(self, "pihat", pi)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_pihat(self, pihat) -> "CausalDataset":
        return CausalDataset(self.X, self.z, self.y, pihat, self.col_kinds)

    def fingerprint(self) -> str:
        """Content hash over (X, z, y); estimated propensities are derived
        state and deliberately excluded."""
        h = hashlib.sha256()
        h.update(np.array(self.X.shape, dtype=np.int64).tobytes())
        h.update(self.X.tobytes())
        h.update(self.z.tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"cannot parse cell at row {row}, column {col}: {text!r}") from None
    if not np.isfinite(v):
        raise DataError(f"non-finite cell at row {row}, column {col}: {text!r}")
    return v


def read_csv(path, has_header: bool = True, response_col: int | str | None = None) -> Dataset:
    """Read a numeric CSV into a Dataset, optionally extracting a response.

    ``response_col`` may be a 0-based column index or, when the file has a
    header, a column name.  Every non-header cell must parse as a finite
    number; failures name the offending cell.
    """
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from None
    with fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r]

    if not rows:
        raise DataError(f"{path}: empty file")

    header: list[str] | None = None
    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: no data rows")

    width = len(rows[0])
    if width == 0:
        raise DataError(f"{path}: no columns")
    values = np.empty((len(rows), width), dtype=float)
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"{path}: ragged row {i}: {len(r)} cells, expected {width}")
        for j, cell in enumerate(r):
            values[i, j] = _parse_cell(cell.strip(), i, j)

    resp_idx: int | None = None
    if response_col is not None:
        if isinstance(response_col, str) and not response_col.lstrip("-").isdigit():
            if header is None:
                raise DataError("named response column requires a header")
            try:
                resp_idx = header.index(response_col)
            except ValueError:
                raise DataError(f"no column named {response_col!r} in header {header}") from None
        else:
            resp_idx = int(response_col)
            if not 0 <= resp_idx < width:
                raise DataError(f"response column {resp_idx} out of range for {width} columns")

    if resp_idx is None:
        return Dataset(values)
    y = values[:, resp_idx].copy()
    X = np.delete(values, resp_idx, axis=1)
    if X.shape[1] == 0:
        raise DataError("no feature columns left after extracting the response")
    return Dataset(X, y)


def write_csv(path, table: dict[str, np.ndarray]) -> None:
    """Write named columns as RFC-4180 CSV at full round-trip precision."""
    if not table:
        raise DataError("no columns")
    cols = {name: np.asarray(v) for name, v in table.items()}
    lengths = {v.shape[0] for v in cols.values()}
    if len(lengths) != 1:
        raise DataError(f"columns have differing lengths: {sorted(lengths)}")
    (n,) = lengths

    def fmt(x) -> str:
        if isinstance(x, (str, np.str_)):
            return str(x)
        return repr(float(x))

    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(cols.keys()))
            for i in range(n):
                w.writerow([fmt(v[i]) for v in cols.values()])
    except OSError as e:
        raise DataError(f"cannot write {path}: {e}") from None
