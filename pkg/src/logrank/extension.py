"""Slack matrices, nonnegative factorizations from protocol leaves, and the
lifted polytope sandwiched between ``P = conv(vertices)`` and
``Q = {x : A x <= b}``.

All polytope data is rational (:class:`fractions.Fraction`) and every check
here is exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .matrix import IntegralMatrix, rank_of
from .protocol import ProtocolTree, leaf_cover

MAX_KSP_SETS = 20


class SlackError(ValueError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class WitnessError(AssertionError):
    def __init__(self, msg, vertex=None):
        super().__init__(msg)
        self.vertex = vertex


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x)) if isinstance(x, (str, float)) else Fraction(x)


@dataclass
class PolytopePair:
    """``P = conv(vertices)`` inside ``Q = {x : A x <= b}``."""

    n: int
    vertices: list[tuple[Fraction, ...]]
    A: list[tuple[Fraction, ...]]
    b: list[Fraction]
    name: str = ""

    def __post_init__(self):
        self.vertices = [tuple(_frac(c) for c in x) for x in self.vertices]
        self.A = [tuple(_frac(c) for c in row) for row in self.A]
        self.b = [_frac(c) for c in self.b]
        if not self.vertices or not self.A:
            raise ValueError("need at least one vertex and one inequality")
        if len(self.b) != len(self.A):
            raise ValueError("A and b disagree on the number of inequalities")
        if any(len(x) != self.n for x in self.vertices) or any(len(r) != self.n for r in self.A):
            raise ValueError(f"coordinates must have dimension {self.n}")
        for j, x in enumerate(self.vertices):
            for i, row in enumerate(self.A):
                if _dot(row, x) > self.b[i]:
                    raise ValueError(f"vertex {j} violates inequality {i}; P is not inside Q")

    @property
    def f(self) -> int:
        return len(self.A)

    @property
    def v(self) -> int:
        return len(self.vertices)

    def to_dict(self) -> dict:
        return {"n": self.n, "name": self.name,
                "vertices": [[str(c) for c in x] for x in self.vertices],
                "A": [[str(c) for c in row] for row in self.A],
                "b": [str(c) for c in self.b]}

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "PolytopePair":
        return cls(int(doc["n"]), doc["vertices"], doc["A"], doc["b"], doc.get("name", ""))


def _dot(row: Sequence[Fraction], x: Sequence[Fraction]) -> Fraction:
    return sum((a * c for a, c in zip(row, x)), Fraction(0))


def load_pair(path) -> PolytopePair:
    with open(path) as fh:
        return PolytopePair.from_dict(json.load(fh))


# ---------------------------------------------------------------- examples


def unit_square() -> PolytopePair:
    verts = [(0, 0), (1, 0), (0, 1), (1, 1)]
    A = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    b = [1, 0, 1, 0]
    return PolytopePair(2, verts, A, b, "unit-square")


def simplex(n: int) -> PolytopePair:
    """``conv{0, e_1, ..., e_n}`` with facets ``x_i >= 0`` and ``sum x <= 1``."""
    verts = [tuple([0] * n)] + [tuple(int(i == j) for j in range(n)) for i in range(n)]
    A = [tuple(-int(i == j) for j in range(n)) for i in range(n)] + [tuple([1] * n)]
    b = [0] * n + [1]
    return PolytopePair(n, verts, A, b, f"simplex-{n}")


def ksp_instance(n: int, N: int, k: int, sets: Sequence[Iterable[int]]) -> PolytopePair:
    """k-Set-Packing: ``P`` is the hull of 0/1 subcollections using each
    element of ``[N] = {1..N}`` at most ``k`` times, ``Q`` its LP relaxation
    (the same element constraints plus ``0 <= x <= 1``).

    Vertices are found by filtering all of ``{0,1}^n``, so ``n`` is capped.
    """
    if n > MAX_KSP_SETS:
        raise ValueError(f"n = {n} > {MAX_KSP_SETS}: vertex enumeration refused")
    if k < 0:
        raise ValueError("k < 0 leaves no feasible subcollection")
    sets = [frozenset(int(e) for e in s) for s in sets]
    if len(sets) != n:
        raise ValueError(f"expected {n} sets, got {len(sets)}")
    for s in sets:
        if any(not 1 <= e <= N for e in s):
            raise ValueError(f"set elements must lie in 1..{N}")
    members = [[i for i, s in enumerate(sets) if e in s] for e in range(1, N + 1)]

    verts = []
    for x in product((0, 1), repeat=n):
        if all(sum(x[i] for i in idx) <= k for idx in members):
            verts.append(x)
    A = [tuple(int(i in idx) for i in range(n)) for idx in members]
    b = [k] * N
    A += [tuple(int(i == j) for j in range(n)) for i in range(n)]
    b += [1] * n
    A += [tuple(-int(i == j) for j in range(n)) for i in range(n)]
    b += [0] * n
    return PolytopePair(n, verts, A, b, f"ksp-n{n}-N{N}-k{k}")


def random_ksp(n: int, N: int, k: int, rng: np.random.Generator, density: float = 0.3) -> PolytopePair:
    sets = [[e for e in range(1, N + 1) if rng.random() < density] for _ in range(n)]
    return ksp_instance(n, N, k, sets)


# ---------------------------------------------------------------- slack


def slack_matrix(pair: PolytopePair, delta: int | None = None) -> IntegralMatrix:
    """``S[i, j] = b_i - A_i x_j``; must be a nonnegative integer (at most
    ``delta`` if given).  The declared bound is the largest entry otherwise."""
    rows = []
    for i, (row, bi) in enumerate(zip(pair.A, pair.b)):
        out = []
        for j, x in enumerate(pair.vertices):
            s = bi - _dot(row, x)
            if s.denominator != 1:
                raise SlackError(f"slack ({i},{j}) = {s} is not integral", (i, j))
            if s < 0 or (delta is not None and s > delta):
                raise SlackError(f"slack ({i},{j}) = {s} outside [0, {delta}]", (i, j))
            out.append(int(s))
        rows.append(out)
    top = max(max(r) for r in rows)
    return IntegralMatrix.from_rows(rows, top if delta is None else delta)


# ---------------------------------------------------------------- factorization


@dataclass
class NonnegFactorization:
    """``target = U @ V`` with ``U >= 0`` (f x s) and ``V >= 0`` (s x v)."""

    U: np.ndarray
    V: np.ndarray
    exact: bool = True
    terms: list[tuple[tuple[int, ...], tuple[int, ...], int]] = field(default_factory=list)

    @property
    def inner_dim(self) -> int:
        return self.U.shape[1]

    def product(self) -> np.ndarray:
        return self.U @ self.V

    def check(self, target: np.ndarray) -> bool:
        return bool(np.all(self.U >= 0) and np.all(self.V >= 0)
                    and np.array_equal(self.product(), np.asarray(target)))

    def to_dict(self) -> dict:
        return {"inner_dim": self.inner_dim, "exact": self.exact,
                "U": self.U.tolist(), "V": self.V.tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def mono_cover(tree: ProtocolTree) -> list[tuple[tuple[int, ...], tuple[int, ...], int]]:
    """Monochromatic rectangles ``(rows, cols, color)`` tiling the matrix.

    Entry leaves are used as they are.  Low-rank leaves are split: rows with
    the same pattern on the leaf's columns form a group, and each group is
    cut by value into one rectangle per color.
    """
    M = tree.matrix
    cover = []
    for leaf in tree.leaves():
        rows, cols = leaf.view.row_ids, leaf.view.col_ids
        if leaf.kind == "leaf_entry":
            cover.append((rows, cols, int(leaf.value)))
            continue
        block = M.view(leaf.view)
        groups: dict[bytes, list[int]] = {}
        for pos, a in enumerate(rows):
            groups.setdefault(block[pos].tobytes(), []).append(pos)
        for positions in groups.values():
            pattern = block[positions[0]]
            for color in sorted(set(pattern.tolist())):
                cs = tuple(cols[j] for j in np.flatnonzero(pattern == color))
                cover.append((tuple(rows[p] for p in positions), cs, int(color)))
    return cover


def nnmf_from_protocol(tree: ProtocolTree) -> NonnegFactorization:
    """Sum of one nonnegative rank-1 term per positive monochromatic piece of
    the leaf cover; ``U @ V`` equals the matrix exactly."""
    cover = leaf_cover(tree)
    if not np.all(cover == 1):
        raise ValueError("protocol leaves do not partition the matrix")
    M = tree.matrix
    terms = [t for t in mono_cover(tree) if t[2] > 0]
    U = np.zeros((M.n_rows, len(terms)), dtype=np.int64)
    V = np.zeros((len(terms), M.n_cols), dtype=np.int64)
    for t, (rows, cols, color) in enumerate(terms):
        U[list(rows), t] = color
        V[t, list(cols)] = 1
    f = NonnegFactorization(U, V, True, terms)
    if not np.array_equal(f.product(), M.entries):
        raise AssertionError("leaf cover does not reproduce the matrix")
    return f


# ---------------------------------------------------------------- lift


@dataclass
class LiftedPolytope:
    """``{(x, y) : A x + U y = b, y >= 0}``; its projection ``K`` satisfies
    ``P ⊆ K ⊆ Q``."""

    A: list[tuple[Fraction, ...]]
    b: list[Fraction]
    U: np.ndarray
    n: int
    witnesses: list[tuple[int, ...]]

    @property
    def s(self) -> int:
        return self.U.shape[1]

    @property
    def lifted_dim(self) -> int:
        return self.n + self.s

    def contains(self, x: Sequence, y: Sequence) -> bool:
        x = [_frac(c) for c in x]
        y = [_frac(c) for c in y]
        if any(c < 0 for c in y) or len(y) != self.s:
            return False
        for i, (row, bi) in enumerate(zip(self.A, self.b)):
            if _dot(row, x) + sum(int(self.U[i, t]) * y[t] for t in range(self.s)) != bi:
                return False
        return True


def lift(pair: PolytopePair, nnmf: NonnegFactorization) -> LiftedPolytope:
    """Build the lifted polytope and check both inclusions.

    ``P ⊆ K``: every vertex ``x_j`` lifts to ``(x_j, V e_j)``.  ``K ⊆ Q``:
    ``U >= 0`` forces ``A x = b - U y <= b`` whenever ``y >= 0``.
    """
    S = slack_matrix(pair)
    if nnmf.U.shape[0] != pair.f or nnmf.V.shape[1] != pair.v:
        raise ValueError("factorization shape does not match the slack matrix")
    if np.any(nnmf.U < 0) or np.any(nnmf.V < 0):
        raise WitnessError("factorization has negative entries")
    if not np.array_equal(nnmf.product(), S.entries):
        raise WitnessError("U V differs from the slack matrix")
    K = LiftedPolytope(pair.A, pair.b, nnmf.U, pair.n, [])
    for j, x in enumerate(pair.vertices):
        y = tuple(int(c) for c in nnmf.V[:, j])
        if not K.contains(x, y):
            raise WitnessError(f"vertex {j} does not lift", j)
        K.witnesses.append(y)
    return K


# ---------------------------------------------------------------- reporting


def xc_report(tree: ProtocolTree, pair: PolytopePair, nnmf: NonnegFactorization | None = None) -> dict:
    """Sizes along the pipeline; informational only."""
    S = slack_matrix(pair)
    if not np.array_equal(tree.matrix.entries, S.entries):
        raise ValueError("tree was not built on this pair's slack matrix")
    nnmf = nnmf or nnmf_from_protocol(tree)
    r = rank_of(S)
    return {
        "name": pair.name,
        "n": pair.n,
        "facets": pair.f,
        "vertices": pair.v,
        "delta": S.delta,
        "slack_rank": r,
        "rank_exceeds_dimension": r > pair.n,
        "leaves": len(tree.leaves()),
        "inner_dim": nnmf.inner_dim,
        "lifted_dim": pair.n + nnmf.inner_dim,
        "lifted_inequalities": nnmf.inner_dim,
        "lifted_equalities": pair.f,
    }
