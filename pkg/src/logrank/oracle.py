"""Brute-force and Monte Carlo references.

These share no code path with the routines they check: rank here is plain
Gauss-Jordan over :class:`fractions.Fraction`, rectangles are found by
enumerating row subsets, and Sheppard's formula is estimated by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np


class OracleRefusal(ValueError):
    """Input too large (or degenerate) for an exact reference computation."""


@dataclass(frozen=True)
class OracleBudget:
    max_rows_for_enumeration: int = 10
    monte_carlo_trials: int = 100_000
    seed: int = 0


def brute_rank(M, cap: int = 10) -> int:
    """Rank by Gauss-Jordan elimination over the rationals."""
    grid = M.tolist() if hasattr(M, "tolist") else M
    rows = [[Fraction(int(x)) for x in row] for row in grid]
    if len(rows) > cap or (rows and len(rows[0]) > cap):
        raise OracleRefusal(f"brute_rank is limited to {cap}x{cap}")
    rank = 0
    n_cols = len(rows[0]) if rows else 0
    for c in range(n_cols):
        pivot = None
        for i in range(rank, len(rows)):
            if rows[i][c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        p = rows[rank][c]
        rows[rank] = [x / p for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def brute_max_mono_rect(M, color: int | None = None, cap: int = 10):
    """Largest-area monochromatic rectangle, exactly.

    Enumerates every subset of the shorter side (rows after an implicit
    transpose if there are fewer columns).  For each subset and color, the
    best partner set is every line that is constant with that color on the
    subset.  Ties keep the first found in enumeration order.
    """
    from .matrix import Rectangle

    A = np.asarray(M.entries if hasattr(M, "entries") else M)
    transposed = A.shape[1] < A.shape[0]
    if transposed:
        A = A.T
    n = A.shape[0]
    if n > cap:
        raise OracleRefusal(f"{n} lines exceed the enumeration cap {cap}")
    colors = [color] if color is not None else sorted(set(A.ravel().tolist()))
    best_area, best = 0, ((), ())
    for size in range(1, n + 1):
        for subset in combinations(range(n), size):
            sub = A[list(subset)]
            for c in colors:
                cols = np.flatnonzero(np.all(sub == c, axis=0))
                area = size * len(cols)
                if area > best_area:
                    best_area, best = area, (subset, tuple(cols.tolist()))
    rows, cols = best
    if transposed:
        rows, cols = cols, rows
    return Rectangle(tuple(rows), tuple(cols))


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    trials: int

    def within(self, value: float, n_sigma: float = 4.0) -> bool:
        # a zero stderr (estimate of exactly 0 or 1) still allows one-count slack
        slack = max(self.stderr, 1.0 / self.trials)
        return abs(self.estimate - value) <= n_sigma * slack


def monte_carlo_sheppard(u, v, trials: int = 100_000, seed: int = 0) -> MonteCarloEstimate:
    """Empirical ``Pr[<g,u> >= 0 and <g,v> >= 0]`` over standard Gaussians ``g``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(u) or not np.any(v):
        raise OracleRefusal("zero vector")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < trials:
        n = min(50_000, trials - done)
        g = rng.standard_normal((n, u.size))
        hits += int(np.count_nonzero((g @ u >= 0) & (g @ v >= 0)))
        done += n
    p = hits / trials
    return MonteCarloEstimate(p, math.sqrt(p * (1 - p) / trials), trials)
