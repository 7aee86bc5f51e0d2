"""Large (almost-)monochromatic rectangles via Gaussian hyperplane rounding.

A rectangle is drawn by intersecting ``k`` half-space rectangles
``{a : <u_a, g> >= 0} x {b : <v_b, g> >= 0}`` built from an equal-norm
factorization of the matrix.  Entry ``(a, b)`` survives one cut with
probability ``h(M_ab / (delta sqrt r))``, so larger values survive more
often and a suitable ``k`` concentrates the rectangle on one color.

Candidates are then turned into exactly monochromatic rectangles by
:func:`extract_mono`, which keeps at least an eighth of the area.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gamma2 import BalancedFactorization, BudgetMiss, balanced_factorization, pad_to_equal_norm
from .matrix import IntegralMatrix, Rectangle, majority, rank_of, exact_rank
from .oracle import brute_max_mono_rect

log = logging.getLogger(__name__)

BOUNDARY_SLACK = 1e-12


class PremiseError(ValueError):
    """The rectangle handed to :func:`extract_mono` is not monochromatic enough."""


# ---------------------------------------------------------------- formulas


def sheppard_h(alpha):
    """Probability that two unit vectors at correlation ``alpha`` both land on
    the nonnegative side of a random Gaussian hyperplane:
    ``(1 - arccos(alpha) / pi) / 2``.

    Accepts scalars or arrays.  Values within 1e-12 outside ``[-1, 1]`` are
    clamped; anything further out raises ``ValueError``.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(np.abs(a) > 1 + BOUNDARY_SLACK):
        raise ValueError(f"correlation outside [-1, 1]: {alpha}")
    out = 0.5 * (1.0 - np.arccos(np.clip(a, -1.0, 1.0)) / math.pi)
    return float(out) if out.ndim == 0 else out


def color_prob(j: int, r: int, delta: int) -> float:
    """Per-cut survival probability ``c(j) = h(j / (delta sqrt r))`` of a ``j``-entry."""
    if not 0 <= j <= delta or r < 1 or delta < 1:
        raise ValueError("need 0 <= j <= delta, r >= 1, delta >= 1")
    return sheppard_h(j / (delta * math.sqrt(r)))


def color_weights_log(r: int, delta: int) -> list[float]:
    """``log m_j = (8 delta)^j * ln(64 r delta)`` for ``j = 0..delta``."""
    if r < 1 or delta < 1:
        raise ValueError("need r >= 1, delta >= 1")
    base = math.log(64 * r * delta)
    return [float((8 * delta) ** j) * base for j in range(delta + 1)]


@dataclass(frozen=True)
class ColorPartition:
    sizes: tuple[int, ...]  # |E_j| for j = 0..delta

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @classmethod
    def of(cls, M: IntegralMatrix, rect: Rectangle | None = None) -> "ColorPartition":
        counts = np.bincount(M.view(rect).ravel(), minlength=M.delta + 1)
        return cls(tuple(int(c) for c in counts))


def select_target_color(partition: ColorPartition, log_weights: Sequence[float]) -> int:
    """Color maximizing ``m_j |E_j|`` (in logs); smallest ``j`` on ties."""
    best, best_val = None, -math.inf
    for j, size in enumerate(partition.sizes):
        if size == 0:
            continue
        val = log_weights[j] + math.log(size)
        if val > best_val:
            best, best_val = j, val
    if best is None:
        raise ValueError("partition has no entries")
    return best


def lower_k_formula(i: int, r: int, delta: int) -> float:
    return ((8 * delta) ** i + 1) * math.log(64 * r * delta) * 1.5 * math.pi * delta * math.sqrt(r)


def upper_k_formula(i: int, r: int, delta: int) -> float:
    base = 8 * delta
    return (base ** (i + 1) - base ** i - 1) * math.log(64 * r * delta) * math.pi * math.sqrt(r) / 4


def k_bounds(i: int, r: int, delta: int) -> tuple[float | None, float | None]:
    """Real-valued lower and upper admissible ``k`` for target color ``i``.

    The lower bound exists for ``i > 0`` (colors below ``i`` must die off),
    the upper bound for ``i < delta`` (colors above ``i`` must not win).
    """
    lower = lower_k_formula(i, r, delta) if i > 0 else None
    upper = upper_k_formula(i, r, delta) if i < delta else None
    return lower, upper


def choose_k(i: int, r: int, delta: int) -> int:
    """The number of cuts used by the existence argument.

    ``i > 0``: the lower bound, rounded up.  ``i == 0``: the upper bound,
    rounded down.
    """
    if i > 0:
        k = math.ceil(lower_k_formula(i, r, delta))
        if i < delta:
            assert k <= math.floor(upper_k_formula(i, r, delta)), "inconsistent k bounds"
        return k
    return math.floor(upper_k_formula(0, r, delta))


# ---------------------------------------------------------------- sampling


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; same key, same draws."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(x) for x in key))
    return np.random.Generator(np.random.PCG64(ss))


def sample_masks(f: BalancedFactorization, k: int, rng: np.random.Generator):
    """Row and column membership masks of one draw from the k-cut distribution."""
    n_rows, n_cols = f.u.shape[0], f.v.shape[0]
    if k == 0:
        return np.ones(n_rows, bool), np.ones(n_cols, bool)
    g = rng.standard_normal((f.dim, k))
    rows = np.all(f.u @ g >= 0, axis=1)
    cols = np.all(f.v @ g >= 0, axis=1)
    return rows, cols


def sample_rectangle(f: BalancedFactorization, k: int, rng: np.random.Generator) -> Rectangle:
    """Intersect ``k`` Gaussian half-space rectangles; ``k = 0`` gives everything."""
    if k < 0:
        raise ValueError("k must be >= 0")
    rows, cols = sample_masks(f, k, rng)
    return Rectangle(tuple(np.flatnonzero(rows)), tuple(np.flatnonzero(cols)))


def membership_counts(f: BalancedFactorization, k: int, samples: int, seed: int) -> np.ndarray:
    """How often each entry lands in the sampled rectangle over ``samples`` draws.

    Uses one stream for the whole batch (vectorized); the per-sample streams
    of :func:`find_almost_mono` are not needed for rate estimates.
    """
    rng = stream(seed, k)
    n_rows, n_cols = f.u.shape[0], f.v.shape[0]
    counts = np.zeros((n_rows, n_cols), dtype=np.int64)
    chunk = 2000
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        g = rng.standard_normal((n, f.dim, k))
        rows = np.all(np.einsum("ad,ndk->nak", f.u, g) >= 0, axis=2)
        cols = np.all(np.einsum("bd,ndk->nbk", f.v, g) >= 0, axis=2)
        counts += rows.T.astype(np.int64) @ cols.astype(np.int64)
        done += n
    return counts


# ---------------------------------------------------------------- scoring


def score(R: Rectangle, M: IntegralMatrix, i: int, r: int) -> int:
    """``|E_i ∩ R| - 16 r * (number of other entries in R)``, exactly."""
    if R.is_empty:
        return 0
    block = M.view(R)
    hits = int(np.count_nonzero(block == i))
    return hits - 16 * r * (R.area - hits)


def is_almost_mono(count: int, area: int, r: int) -> bool:
    """``count / area >= 1 - 1/(16 r)`` in integer arithmetic."""
    r = max(r, 1)
    return 16 * r * count >= (16 * r - 1) * area


@dataclass
class SamplerConfig:
    """How hard :func:`find_almost_mono` looks.

    ``k`` fixes a single cut count; otherwise ``k_sweep`` (default
    ``range(0, k_max + 1)``) is tried.  ``analytic_k`` uses :func:`choose_k`.
    """

    samples: int = 32
    seed: int = 0
    k: int | None = None
    k_max: int = 8
    k_sweep: tuple[int, ...] | None = None
    analytic_k: bool = False
    brute_cap: int = 10
    tol: float = 1e-8

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")

    def k_values(self, M: IntegralMatrix | None = None, r: int = 1) -> list[int]:
        if self.analytic_k:
            i = select_target_color(ColorPartition.of(M), color_weights_log(r, M.delta))
            return [choose_k(i, r, M.delta)]
        if self.k is not None:
            return [self.k]
        if self.k_sweep is not None:
            return list(self.k_sweep)
        return list(range(self.k_max + 1))


@dataclass
class CandidateRectangle:
    rect: Rectangle
    target_color: int
    score: int
    mono_fraction: float
    qualifies: bool = False
    source: str = "sample"
    k: int | None = None
    sample_index: int | None = None
    stats: dict = field(default_factory=dict)

    @property
    def area(self) -> int:
        return self.rect.area

    def key(self) -> tuple:
        # qualifying candidates rank by area; the rest by score, then area
        if self.qualifies:
            return (1, self.area, 0)
        return (0, self.score, self.area)

    def to_dict(self) -> dict:
        return {"rows": list(self.rect.row_ids), "cols": list(self.rect.col_ids),
                "color": self.target_color, "score": self.score, "area": self.area,
                "fraction": self.mono_fraction, "qualifies": self.qualifies,
                "source": self.source, "k": self.k, "sample_index": self.sample_index}


def make_candidate(M: IntegralMatrix, R: Rectangle, r: int, **extra) -> CandidateRectangle:
    color, count = majority(M.view(R))
    return CandidateRectangle(R, color, score(R, M, color, r), count / R.area,
                              is_almost_mono(count, R.area, r), **extra)


def greedy_almost_mono(M: IntegralMatrix, r: int) -> Rectangle:
    """Peel off the row or column with the most off-majority entries until the
    rest is ``(1 - 1/16r)``-monochromatic.  Rows win ties."""
    rows = list(range(M.n_rows))
    cols = list(range(M.n_cols))
    while True:
        block = M.entries[np.ix_(rows, cols)]
        color, count = majority(block)
        if is_almost_mono(count, block.size, r):
            return Rectangle(tuple(rows), tuple(cols))
        off = block != color
        row_bad = off.sum(axis=1)
        col_bad = off.sum(axis=0)
        ri, ci = int(np.argmax(row_bad)), int(np.argmax(col_bad))
        if len(rows) > 1 and (row_bad[ri] >= col_bad[ci] or len(cols) == 1):
            del rows[ri]
        else:
            del cols[ci]


def _factorization_for(M: IntegralMatrix, r: int, tol: float) -> BalancedFactorization:
    try:
        return balanced_factorization(M, r, tol)
    except BudgetMiss as miss:
        # keep going with a larger common norm; cut probabilities become h(M_ab / s^2)
        f = miss.factorization
        s = math.sqrt(max(miss.max_u_sq, miss.max_v_sq))
        log.warning("gamma2 budget miss (%s); padding to s=%.6g", miss, s)
        return pad_to_equal_norm(f, s)


def find_almost_mono(M: IntegralMatrix, r: int | None = None,
                     config: SamplerConfig | None = None) -> CandidateRectangle:
    """Best ``(1 - 1/16r)``-monochromatic rectangle the sampler can find.

    Sampling first (each draw on its own ``(seed, k, index)`` stream); if no
    draw qualifies, greedy peeling, plus exact enumeration when the short
    side has at most ``brute_cap`` lines.  Qualifying candidates are ranked
    by area; otherwise by score and then area.  Earlier ``(k, index)`` wins
    ties.
    """
    config = config or SamplerConfig()
    if r is None:
        r = rank_of(M)
    full = M.full_rect()
    whole = make_candidate(M, full, r, source="full", k=0)
    if whole.mono_fraction == 1.0 or r == 0:
        return whole

    f = _factorization_for(M, r, config.tol)
    best = None
    tries = hits = 0
    per_k = {}
    for k in config.k_values(M, r):
        n = 1 if k == 0 else config.samples
        k_hits = 0
        for idx in range(n):
            R = sample_rectangle(f, k, stream(config.seed, k, idx))
            tries += 1
            if R.is_empty:
                continue
            cand = make_candidate(M, R, r, source="sample", k=k, sample_index=idx)
            k_hits += cand.qualifies
            if best is None or cand.key() > best.key():
                best = cand
        hits += k_hits
        per_k[k] = k_hits / n

    if best is None or not best.qualifies:
        fallbacks = [make_candidate(M, greedy_almost_mono(M, r), r, source="greedy")]
        if min(M.shape) <= config.brute_cap:
            fallbacks.append(make_candidate(M, brute_max_mono_rect(M, cap=config.brute_cap), r,
                                            source="brute"))
        for cand in fallbacks:
            if best is None or cand.key() > best.key():
                best = cand
    best.stats = {"draws": tries, "qualifying": hits, "hit_rate_by_k": per_k}
    return best


# ---------------------------------------------------------------- extraction


def extract_mono(M: IntegralMatrix, R: Rectangle, r: int) -> Rectangle:
    """Shrink an almost-monochromatic ``R`` to an exactly monochromatic one.

    Inside ``M[R]`` with majority color ``alpha``: drop columns with at least
    ``|rows|/(8r)`` off-color entries, take a maximal independent set of the
    remaining columns, keep the rows that are all ``alpha`` there, and keep
    the good columns that are all ``alpha`` on those rows.  The result has
    area at least ``|R| / 8``.
    """
    if R.is_empty:
        raise PremiseError("empty rectangle")
    r = max(int(r), 1)
    block = M.view(R)
    alpha, count = majority(block)
    if not is_almost_mono(count, R.area, r):
        raise PremiseError(f"majority fraction {count / R.area:.6f} below 1 - 1/(16*{r})")
    n_rows, n_cols = block.shape

    off = block != alpha
    good = [j for j in range(n_cols) if 8 * r * int(off[:, j].sum()) < n_rows]
    basis = []
    if good:
        cert = exact_rank(block[:, good].tolist())
        basis = [good[p] for p in cert.pivot_cols]
    if len(basis) > r:
        raise PremiseError(f"rectangle has rank > {r}")
    rows = [a for a in range(n_rows) if not off[a, basis].any()]
    cols = [j for j in good if rows and not off[rows, j].any()]

    out = Rectangle(tuple(R.row_ids[a] for a in rows), tuple(R.col_ids[j] for j in cols))
    if 8 * out.area < R.area:
        raise AssertionError(f"extracted area {out.area} < |R|/8 = {R.area / 8}")
    return out
