"""Bounded integral matrices, rectangles and exact rank.

Everything here is exact: entries are integers in ``[0, delta]`` and rank is
computed over the rationals with fraction-free (Bareiss) elimination on
Python integers.  Floating point never enters this module.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INT64_MAX = np.iinfo(np.int64).max


class MatrixError(ValueError):
    """Malformed matrix input (shape, entry range, file format)."""


class MatrixOverflowError(OverflowError):
    """An entry does not fit the fixed-width integer representation."""


class EmptyRectangleError(ValueError):
    """Statistics requested on a rectangle with no entries."""


@dataclass(frozen=True)
class Rectangle:
    """Index sets ``row_ids x col_ids`` into some matrix.

    Indices are kept in the order given.  A rectangle with an empty side is
    allowed and reported through :attr:`is_empty`.
    """

    row_ids: tuple[int, ...]
    col_ids: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(int(i) for i in self.row_ids)
        cols = tuple(int(j) for j in self.col_ids)
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ValueError("rectangle indices must be distinct")
        object.__setattr__(self, "row_ids", rows)
        object.__setattr__(self, "col_ids", cols)

    @classmethod
    def full(cls, n_rows: int, n_cols: int) -> "Rectangle":
        return cls(tuple(range(n_rows)), tuple(range(n_cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_ids), len(self.col_ids)

    @property
    def area(self) -> int:
        return len(self.row_ids) * len(self.col_ids)

    @property
    def is_empty(self) -> bool:
        return not self.row_ids or not self.col_ids

    def contains(self, a: int, b: int) -> bool:
        return a in self.row_ids and b in self.col_ids

    def check_bounds(self, n_rows: int, n_cols: int) -> None:
        if any(not 0 <= i < n_rows for i in self.row_ids):
            raise IndexError("row index out of range")
        if any(not 0 <= j < n_cols for j in self.col_ids):
            raise IndexError("column index out of range")

    def to_dict(self) -> dict:
        return {"rows": list(self.row_ids), "cols": list(self.col_ids)}


@dataclass(frozen=True)
class IntegralMatrix:
    """Matrix with integer entries in ``[0, delta]``.

    ``delta`` is a declared bound and need not be attained.  The entry array
    is stored read-only, so instances can be shared freely.
    """

    entries: np.ndarray
    delta: int

    def __post_init__(self):
        raw = self.entries
        if isinstance(raw, np.ndarray) and raw.dtype == np.int64:
            arr = raw.copy()
        else:
            arr = _to_int64(raw)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise MatrixError(f"need a non-empty 2-d grid, got shape {arr.shape}")
        delta = int(self.delta)
        if delta < 0:
            raise MatrixError("delta must be >= 0")
        if delta > INT64_MAX:
            raise MatrixOverflowError("delta exceeds int64")
        bad = np.argwhere((arr < 0) | (arr > delta))
        if len(bad):
            a, b = (int(x) for x in bad[0])
            raise MatrixError(f"entry ({a},{b}) = {arr[a, b]} outside [0, {delta}]")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], delta: int | None = None) -> "IntegralMatrix":
        arr = _to_int64(rows)
        if delta is None:
            delta = int(arr.max()) if arr.size else 0
        return cls(arr, delta)

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def full_rect(self) -> Rectangle:
        return Rectangle.full(self.n_rows, self.n_cols)

    def view(self, rect: Rectangle | None = None) -> np.ndarray:
        """Entries of ``rect`` as a (read-only) array; the whole matrix if None."""
        if rect is None:
            return self.entries
        return self.entries[np.ix_(rect.row_ids, rect.col_ids)]

    def submatrix(self, rect: Rectangle) -> "IntegralMatrix":
        rect.check_bounds(self.n_rows, self.n_cols)
        return IntegralMatrix(self.view(rect), self.delta)

    def transpose(self) -> "IntegralMatrix":
        return IntegralMatrix(self.entries.T, self.delta)

    def tolist(self) -> list[list[int]]:
        return self.entries.tolist()

    def to_json(self) -> str:
        return json.dumps({"delta": self.delta, "rows": self.tolist()})

    def __eq__(self, other):
        if not isinstance(other, IntegralMatrix):
            return NotImplemented
        return self.delta == other.delta and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.delta, self.entries.shape, self.entries.tobytes()))


def _to_int64(data) -> np.ndarray:
    try:
        values = [[int(x) for x in row] for row in data]
    except TypeError as exc:
        raise MatrixError("matrix must be a grid of integers") from exc
    except ValueError as exc:
        raise MatrixError(str(exc)) from exc
    if values and len({len(r) for r in values}) != 1:
        raise MatrixError("ragged rows")
    for i, row in enumerate(values):
        for j, x in enumerate(row):
            if abs(x) > INT64_MAX:
                raise MatrixOverflowError(f"entry ({i},{j}) does not fit in int64")
    return np.array(values, dtype=np.int64).reshape(len(values), -1 if values else 0)


# ---------------------------------------------------------------- loading


def load_csv(path: str | Path, delta: int | None = None) -> IntegralMatrix:
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            cells = [c.strip() for c in line if c.strip() != ""]
            if not cells:
                continue
            try:
                rows.append([int(c) for c in cells])
            except ValueError as exc:
                raise MatrixError(f"{path}: non-integer cell ({exc})") from exc
    if not rows:
        raise MatrixError(f"{path}: no rows")
    return IntegralMatrix.from_rows(rows, delta)


def load_json(path: str | Path) -> IntegralMatrix:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MatrixError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or "rows" not in doc or "delta" not in doc:
        raise MatrixError(f'{path}: expected {{"delta": ..., "rows": [...]}}')
    return IntegralMatrix.from_rows(doc["rows"], doc["delta"])


def load_matrix(path: str | Path, delta: int | None = None) -> IntegralMatrix:
    """Load a matrix from ``.json`` or CSV (anything else)."""
    if str(path).endswith(".json"):
        m = load_json(path)
        if delta is not None and delta != m.delta:
            m = IntegralMatrix(m.entries, delta)
        return m
    return load_csv(path, delta)


# ---------------------------------------------------------------- rank


@dataclass(frozen=True)
class RankCertificate:
    """Rank together with a nonsingular ``rank x rank`` pivot submatrix.

    ``pivot_cols`` are the lexicographically first maximal set of independent
    columns; ``pivot_rows`` are rows making the pivot block nonsingular.
    Indices refer to the matrix (or view) the certificate was computed on.
    """

    rank: int
    pivot_rows: tuple[int, ...] = field(default=())
    pivot_cols: tuple[int, ...] = field(default=())

    def check(self, grid) -> bool:
        """Recompute the pivot minor exactly; True iff it is nonzero."""
        if self.rank == 0:
            return True
        block = [[int(grid[i][j]) for j in self.pivot_cols] for i in self.pivot_rows]
        return bareiss_determinant(block) != 0


def _bareiss(rows: list[list[int]]) -> tuple[int, list[int], list[int], int]:
    """Fraction-free row echelon form, in place.

    Returns ``(rank, pivot_rows, pivot_cols, last_pivot)`` where
    ``pivot_rows`` are original row positions.
    """
    n = len(rows)
    m = len(rows[0]) if n else 0
    order = list(range(n))
    prev = 1
    rank = 0
    pivot_cols = []
    for col in range(m):
        if rank == n:
            break
        piv = next((i for i in range(rank, n) if rows[i][col] != 0), None)
        if piv is None:
            continue
        if piv != rank:
            rows[rank], rows[piv] = rows[piv], rows[rank]
            order[rank], order[piv] = order[piv], order[rank]
        p = rows[rank][col]
        prow = rows[rank]
        for i in range(rank + 1, n):
            row = rows[i]
            f = row[col]
            for j in range(col + 1, m):
                num = p * row[j] - f * prow[j]
                q, rem = divmod(num, prev)
                if rem:
                    raise ArithmeticError("Bareiss division was not exact")
                row[j] = q
            row[col] = 0
        prev = p
        pivot_cols.append(col)
        rank += 1
    return rank, sorted(order[:rank]), pivot_cols, prev


def bareiss_determinant(square: Sequence[Sequence[int]]) -> int:
    n = len(square)
    if n == 0:
        return 1
    rows = [[int(x) for x in r] for r in square]
    if any(len(r) != n for r in rows):
        raise ValueError("determinant needs a square matrix")
    sign = 1
    prev = 1
    for k in range(n):
        piv = next((i for i in range(k, n) if rows[i][k] != 0), None)
        if piv is None:
            return 0
        if piv != k:
            rows[k], rows[piv] = rows[piv], rows[k]
            sign = -sign
        p = rows[k][k]
        for i in range(k + 1, n):
            f = rows[i][k]
            for j in range(k + 1, n):
                rows[i][j] = (p * rows[i][j] - f * rows[k][j]) // prev
            rows[i][k] = 0
        prev = p
    return sign * rows[n - 1][n - 1]


def _grid(M, rect: Rectangle | None) -> list[list[int]]:
    if isinstance(M, IntegralMatrix):
        return M.view(rect).tolist()
    arr = np.asarray(M, dtype=object)
    if rect is not None:
        arr = arr[np.ix_(rect.row_ids, rect.col_ids)]
    return [[int(x) for x in row] for row in arr.tolist()]


def exact_rank(M, rect: Rectangle | None = None) -> RankCertificate:
    """Exact rank of ``M`` (or of its view on ``rect``) with a pivot certificate.

    Pivot indices are positions inside the view, not root indices.
    """
    grid = _grid(M, rect)
    if not grid or not grid[0]:
        raise MatrixError("rank of an empty matrix")
    rank, prows, pcols, _ = _bareiss(grid)
    # pivot rows found by the elimination pair with the pivot columns
    return RankCertificate(rank, tuple(prows), tuple(pcols))


def rank_of(M, rect: Rectangle | None = None) -> int:
    grid = _grid(M, rect)
    if not grid or not grid[0]:
        return 0
    return _bareiss(grid)[0]


# ---------------------------------------------------------------- structure


def deduplicate(M: IntegralMatrix):
    """Collapse identical rows and columns.

    Returns ``(reduced, row_map, col_map)`` where ``row_map[a]`` is the row of
    ``reduced`` representing original row ``a`` (first occurrence order).
    """
    rows, row_map = _unique_lines(M.entries)
    cols, col_map = _unique_lines(M.entries.T)
    reduced = M.entries[np.ix_(rows, cols)]
    return IntegralMatrix(reduced, M.delta), row_map, col_map


def _unique_lines(arr: np.ndarray) -> tuple[list[int], list[int]]:
    seen: dict[bytes, int] = {}
    reps: list[int] = []
    mapping: list[int] = []
    for idx in range(arr.shape[0]):
        key = arr[idx].tobytes()
        if key not in seen:
            seen[key] = len(reps)
            reps.append(idx)
        mapping.append(seen[key])
    return reps, mapping


def dedup_view(M: IntegralMatrix, rect: Rectangle) -> tuple[Rectangle, dict[int, list[int]], dict[int, list[int]]]:
    """Representatives of the distinct rows/columns inside a view.

    Returns a rectangle of representative (root) indices and, for each
    representative, the root indices it stands for.
    """
    block = M.view(rect)
    row_groups: dict[bytes, list[int]] = {}
    for pos, a in enumerate(rect.row_ids):
        row_groups.setdefault(block[pos].tobytes(), []).append(a)
    col_groups: dict[bytes, list[int]] = {}
    for pos, b in enumerate(rect.col_ids):
        col_groups.setdefault(block[:, pos].tobytes(), []).append(b)
    rows = {g[0]: g for g in row_groups.values()}
    cols = {g[0]: g for g in col_groups.values()}
    return Rectangle(tuple(rows), tuple(cols)), rows, cols


def count_distinct(M: IntegralMatrix, rect: Rectangle | None = None) -> tuple[int, int]:
    block = M.view(rect)
    n_rows = len({block[i].tobytes() for i in range(block.shape[0])})
    n_cols = len({block[:, j].tobytes() for j in range(block.shape[1])})
    return n_rows, n_cols


def distinct_bound_check(M: IntegralMatrix, rank: int | None = None) -> bool:
    """True iff distinct rows and distinct columns each number at most (delta+1)^rank."""
    if rank is None:
        rank = rank_of(M)
    bound = (M.delta + 1) ** rank
    n_rows, n_cols = count_distinct(M)
    return n_rows <= bound and n_cols <= bound


def mono_stats(M: IntegralMatrix, rect: Rectangle) -> tuple[int, float]:
    """Majority value on ``rect`` and its frequency.

    Ties go to the smaller value.
    """
    if rect.is_empty:
        raise EmptyRectangleError("rectangle has no entries")
    color, count = majority(M.view(rect))
    return color, count / rect.area


def majority(block: np.ndarray) -> tuple[int, int]:
    counts = np.bincount(np.asarray(block).ravel())
    color = int(np.argmax(counts))
    return color, int(counts[color])


def color_counts(values: Iterable[int]) -> Counter:
    return Counter(int(v) for v in values)
