"""Equal-norm factorizations ``M[a, b] = <u_a, v_b>``.

The rectangle sampler needs every ``u_a`` and ``v_b`` to have the same
length ``s = sqrt(delta) * r**0.25``.  We get there in two steps:

1. :func:`factorize_bounded` finds vectors in dimension ``r`` whose squared
   norms are all at most ``delta * sqrt(r)``.
2. :func:`pad_to_equal_norm` appends one private coordinate per row and per
   column to lift every norm to exactly ``s``.

The first step starts from a balanced SVD split.  If that misses the
budget, it reweights the row space with a Khachiyan-style design iteration
(the John ellipsoid of the symmetric row set), which provably reaches
``max|u|^2 * max|v|^2 <= r * max_b sum_a w_a M_ab^2 <= r * delta^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .matrix import IntegralMatrix, rank_of

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000
ROUNDOFF = 1e-12


class BudgetMiss(RuntimeError):
    """The solver could not get within ``delta * sqrt(r)`` in the iteration cap.

    ``factorization`` holds the best (balanced, unpadded) vectors found so
    callers can still pad them to a larger ``s``.
    """

    def __init__(self, msg, max_u_sq, max_v_sq, budget, factorization=None):
        super().__init__(msg)
        self.max_u_sq = max_u_sq
        self.max_v_sq = max_v_sq
        self.budget = budget
        self.factorization = factorization


@dataclass(frozen=True)
class BalancedFactorization:
    u: np.ndarray  # (n_rows, dim)
    v: np.ndarray  # (n_cols, dim)
    s: float
    recon_error: float = 0.0
    iterations: int = 0
    degenerate: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.u.shape[1]

    @property
    def u_norms(self) -> np.ndarray:
        return np.linalg.norm(self.u, axis=1)

    @property
    def v_norms(self) -> np.ndarray:
        return np.linalg.norm(self.v, axis=1)

    def gram(self) -> np.ndarray:
        return self.u @ self.v.T

    def to_dict(self) -> dict:
        return {"dim": self.dim, "s": self.s, "u": self.u.tolist(), "v": self.v.tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "BalancedFactorization":
        dim = int(doc["dim"])
        u = np.asarray(doc["u"], dtype=float).reshape(-1, dim)
        v = np.asarray(doc["v"], dtype=float).reshape(-1, dim)
        return cls(u, v, float(doc["s"]))


def target_norm(delta: int, r: int) -> float:
    """``sqrt(delta) * r**(1/4)``, the common length the sampler wants."""
    return math.sqrt(delta) * r ** 0.25


def _balance(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rescale u by c and v by 1/c so that the largest norms agree
    mu = float(np.max(np.sum(x * x, axis=1)))
    beta = float(np.max(np.sum(y * y, axis=1)))
    if mu == 0.0 or beta == 0.0:
        return x, y
    c = (beta / mu) ** 0.25
    return x * c, y / c


def _spectral_split(M: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray]:
    P, sigma, Qt = np.linalg.svd(M, full_matrices=False)
    root = np.sqrt(sigma[:r])
    return P[:, :r] * root, Qt[:r].T * root


def _max_sq(x: np.ndarray) -> float:
    return float(np.max(np.sum(x * x, axis=1)))


def factorize_bounded(M: IntegralMatrix, r: int | None = None, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> BalancedFactorization:
    """Factor ``M`` in dimension ``r`` with all squared norms ``<= delta*sqrt(r)``.

    ``s`` of the result is the padding target ``sqrt(delta) r^(1/4)``; the
    vectors themselves are not padded yet.  Raises :class:`BudgetMiss` when
    the budget is not reached within ``max_iter`` design iterations.
    """
    if r is None:
        r = rank_of(M)
    A = M.entries.astype(float)
    n_rows, n_cols = A.shape
    if r == 0:
        return BalancedFactorization(np.zeros((n_rows, 0)), np.zeros((n_cols, 0)), 0.0,
                                     degenerate=True)
    if M.delta < 1:
        raise ValueError("nonzero matrix with delta < 1")
    budget = M.delta * math.sqrt(r)

    x, y = _balance(*_spectral_split(A, r))
    iterations = 0
    if r > 1 and max(_max_sq(x), _max_sq(y)) > budget * (1 + ROUNDOFF):
        x, y, iterations = _design_reweight(x, y, A, budget, max_iter)

    err = float(np.max(np.abs(x @ y.T - A)))
    f = BalancedFactorization(x, y, target_norm(M.delta, r), err, iterations)
    top = max(_max_sq(x), _max_sq(y))
    if top > budget * (1 + tol):
        raise BudgetMiss(f"max squared norm {top:.6g} exceeds budget {budget:.6g}",
                         _max_sq(x), _max_sq(y), budget, f)
    return f


def _design_reweight(x, y, A, budget, max_iter):
    """Search row weights ``w`` for the map ``u = X^{-1/2} x, v = X^{1/2} y``.

    With ``X = sum_a w_a x_a x_a^T`` this keeps ``<u_a, v_b> = <x_a, y_b>``
    and gives ``|v_b|^2 = sum_a w_a M_ab^2``.  Khachiyan steps drive
    ``max_a x_a^T X^{-1} x_a`` down to the dimension, which is the John
    ellipsoid condition.
    """
    m, r = x.shape
    # zero rows carry no weight in the optimal design
    live = np.sum(x * x, axis=1) > 1e-24
    w = live / live.sum()
    best = None
    best_top = math.inf
    A2 = A * A
    for it in range(max_iter + 1):
        X = (x * w[:, None]).T @ x
        evals, evecs = np.linalg.eigh(X)
        evals = np.maximum(evals, 1e-300)
        inv_half = (evecs / np.sqrt(evals)) @ evecs.T
        half = (evecs * np.sqrt(evals)) @ evecs.T
        g = np.einsum("ij,jk,ik->i", x, np.linalg.inv(X), x)
        mu = float(g.max())
        beta = float((w @ A2).max())
        top = math.sqrt(mu * beta)
        if top < best_top:
            best_top = top
            best = (x @ inv_half, y @ half)
        if top <= budget * (1 + ROUNDOFF):
            break
        if it == max_iter:
            break
        # Todd-Yildirim: toward the worst-covered row, or away from the best one
        up = int(np.argmax(g))
        support = np.flatnonzero(w > 0)
        down = support[int(np.argmin(g[support]))]
        if g[up] / r - 1.0 >= 1.0 - g[down] / r:
            j = up
            step = (g[j] / r - 1.0) / (g[j] - 1.0)
        else:
            j = down
            floor = -w[j] / (1.0 - w[j])
            step = floor if g[j] <= 1.0 else max((g[j] / r - 1.0) / (g[j] - 1.0), floor)
        w = (1.0 - step) * w
        w[j] += step
        w[w < 0] = 0.0
    u, v = _balance(*best)
    return u, v, it


def pad_to_equal_norm(f: BalancedFactorization, s: float | None = None,
                      tol: float = DEFAULT_TOL) -> BalancedFactorization:
    """Append private coordinates so every vector has length exactly ``s``.

    Row ``a`` gets coordinate ``dim + a``; column ``b`` gets ``dim + n_rows + b``.
    Inner products are untouched because the private coordinates of rows and
    columns are disjoint.  Norms above ``s`` by more than ``tol`` (relative,
    on squares) are a precondition violation.
    """
    if s is None:
        s = f.s
    s2 = float(s) ** 2
    u2 = np.sum(f.u * f.u, axis=1)
    v2 = np.sum(f.v * f.v, axis=1)
    worst = max(float(u2.max(initial=0.0)), float(v2.max(initial=0.0)))
    if worst > s2 * (1 + tol) + 1e-300:
        raise ValueError(f"s = {s} is below an existing norm ({math.sqrt(worst)})")
    n_rows, n_cols = f.u.shape[0], f.v.shape[0]
    dim = f.dim
    new_dim = dim + n_rows + n_cols
    u = np.zeros((n_rows, new_dim))
    v = np.zeros((n_cols, new_dim))
    u[:, :dim] = f.u
    v[:, :dim] = f.v
    u[np.arange(n_rows), dim + np.arange(n_rows)] = np.sqrt(np.maximum(s2 - u2, 0.0))
    v[np.arange(n_cols), dim + n_rows + np.arange(n_cols)] = np.sqrt(np.maximum(s2 - v2, 0.0))
    return BalancedFactorization(u, v, float(s), f.recon_error, f.iterations, f.degenerate)


def balanced_factorization(M: IntegralMatrix, r: int | None = None, tol: float = DEFAULT_TOL,
                           max_iter: int = DEFAULT_MAX_ITER, s: float | None = None):
    """Factorize and pad in one go; the form consumed by the sampler.

    ``s`` overrides the padding target (e.g. after a :class:`BudgetMiss`).
    """
    if r is None:
        r = rank_of(M)
    f = factorize_bounded(M, r, tol, max_iter)
    if f.degenerate:
        return f
    return pad_to_equal_norm(f, f.s if s is None else s, tol)


@dataclass
class FactorizationReport:
    max_error: float
    min_u_norm: float
    max_u_norm: float
    min_v_norm: float
    max_v_norm: float
    budget_ratio: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_factorization(f: BalancedFactorization, M: IntegralMatrix, r: int | None = None,
                         tol: float | None = None) -> FactorizationReport:
    """Reconstruction error, norm range, and ``s^2 / (delta sqrt r)``."""
    if f.u.shape[0] != M.n_rows or f.v.shape[0] != M.n_cols:
        raise ValueError("factorization shape does not match matrix")
    if r is None:
        r = rank_of(M)
    err = float(np.max(np.abs(f.gram() - M.entries))) if f.dim else float(np.max(M.entries))
    un, vn = f.u_norms, f.v_norms
    denom = M.delta * math.sqrt(r)
    ratio = f.s ** 2 / denom if denom else (0.0 if f.s == 0 else math.inf)
    return FactorizationReport(err, float(un.min()), float(un.max()), float(vn.min()),
                               float(vn.max()), ratio)
