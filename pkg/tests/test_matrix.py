import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logrank.matrix import (EmptyRectangleError, IntegralMatrix, MatrixError, MatrixOverflowError,
                            Rectangle, bareiss_determinant, count_distinct, dedup_view, deduplicate,
                            distinct_bound_check, exact_rank, load_matrix, mono_stats, rank_of)
from logrank.oracle import brute_rank

from conftest import random_matrix


@st.composite
def small_matrices(draw, max_n=10, max_delta=3):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_n))
    delta = draw(st.integers(1, max_delta))
    rows = draw(st.lists(st.lists(st.integers(0, delta), min_size=m, max_size=m),
                         min_size=n, max_size=n))
    return IntegralMatrix.from_rows(rows, delta)


class TestIntegralMatrix:
    def test_entry_range_enforced(self):
        with pytest.raises(MatrixError):
            IntegralMatrix.from_rows([[0, 3]], delta=2)
        with pytest.raises(MatrixError):
            IntegralMatrix.from_rows([[-1, 0]], delta=2)

    def test_delta_need_not_be_attained(self):
        M = IntegralMatrix.from_rows([[0, 1]], delta=5)
        assert M.delta == 5

    def test_empty_rejected(self):
        with pytest.raises(MatrixError):
            IntegralMatrix.from_rows([], delta=1)

    def test_overflow_signalled(self):
        with pytest.raises(MatrixOverflowError):
            IntegralMatrix.from_rows([[2 ** 70]], delta=2 ** 70)

    def test_immutable(self):
        M = IntegralMatrix.from_rows([[1, 0]])
        with pytest.raises(ValueError):
            M.entries[0, 0] = 0

    def test_loaders(self, tmp_path):
        (tmp_path / "m.csv").write_text("1,0\n0,1\n")
        (tmp_path / "m.json").write_text(json.dumps({"delta": 3, "rows": [[1, 0], [0, 1]]}))
        (tmp_path / "bad.json").write_text(json.dumps({"delta": 1, "rows": [[2]]}))
        a = load_matrix(tmp_path / "m.csv")
        b = load_matrix(tmp_path / "m.json")
        assert a.tolist() == b.tolist() and a.delta == 1 and b.delta == 3
        with pytest.raises(MatrixError):
            load_matrix(tmp_path / "bad.json")
        with pytest.raises(MatrixError):
            load_matrix(tmp_path / "m.csv", delta=0)


class TestExactRank:
    def test_identity(self):
        assert exact_rank(np.eye(2, dtype=int)).rank == 2

    def test_all_ones(self):
        assert exact_rank(np.ones((5, 7), dtype=int)).rank == 1

    def test_dependent_third_row(self):
        # row3 = row1 + row2; fraction oracle agrees
        rows = [[1, 0, 1], [0, 1, 1], [1, 1, 2]]
        cert = exact_rank(rows)
        assert cert.rank == 2 == brute_rank(rows)
        assert cert.check(rows)

    def test_zero_matrix(self):
        cert = exact_rank(np.zeros((3, 4), dtype=int))
        assert cert.rank == 0 and cert.pivot_rows == () and cert.check(np.zeros((3, 4)))

    def test_pivot_cols_are_lexicographically_first(self):
        rows = [[0, 2, 4, 1], [0, 1, 2, 0]]
        assert exact_rank(rows).pivot_cols == (1, 3)

    def test_view_rank(self):
        M = IntegralMatrix.from_rows([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        assert rank_of(M, Rectangle((0, 1), (0, 1))) == 2
        assert rank_of(M, Rectangle((0, 1), (2,))) == 0

    def test_determinant(self):
        assert bareiss_determinant([[2, 1], [1, 3]]) == 5
        assert bareiss_determinant([[0, 1], [1, 0]]) == -1
        assert bareiss_determinant([[1, 2], [2, 4]]) == 0

    def test_large_entries_stay_exact(self):
        big = 10 ** 30
        rows = [[big, big + 1], [big - 1, big]]
        # det = big^2 - (big^2 - 1) = 1
        assert exact_rank(rows).rank == 2
        assert bareiss_determinant(rows) == 1

    def test_agrees_with_fraction_oracle(self, rng):
        for _ in range(500):
            M = random_matrix(rng, max_rows=10, max_delta=3)
            cert = exact_rank(M)
            assert cert.rank == brute_rank(M.tolist())
            assert cert.check(M.tolist())
            assert len(cert.pivot_rows) == len(cert.pivot_cols) == cert.rank

    @settings(max_examples=200, deadline=None)
    @given(small_matrices())
    def test_rank_property(self, M):
        cert = exact_rank(M)
        assert cert.rank == brute_rank(M.tolist())
        assert cert.check(M.tolist())
        assert exact_rank(M.transpose()).rank == cert.rank


class TestDeduplicate:
    def test_merges_identical_rows(self):
        M = IntegralMatrix.from_rows([[1, 0, 2], [1, 0, 2], [0, 1, 1]])
        R, rmap, cmap = deduplicate(M)
        assert R.shape == (2, 3)
        assert rmap == [0, 0, 1] and cmap == [0, 1, 2]

    def test_distinct_is_identity(self):
        M = IntegralMatrix.from_rows([[1, 0], [0, 1]])
        R, rmap, cmap = deduplicate(M)
        assert R == M and rmap == [0, 1] and cmap == [0, 1]

    def test_round_trip_random(self, rng):
        for _ in range(50):
            M = IntegralMatrix(rng.integers(0, 2, (8, 8)), 1)
            R, rmap, cmap = deduplicate(M)
            for a in range(8):
                for b in range(8):
                    assert R.entries[rmap[a], cmap[b]] == M.entries[a, b]
            assert count_distinct(R) == R.shape

    @settings(max_examples=100, deadline=None)
    @given(small_matrices())
    def test_rank_preserved(self, M):
        assert rank_of(deduplicate(M)[0]) == rank_of(M)

    def test_dedup_view_groups(self):
        M = IntegralMatrix.from_rows([[1, 1, 0], [1, 1, 0], [0, 0, 1]])
        reps, rows, cols = dedup_view(M, M.full_rect())
        assert reps.row_ids == (0, 2) and reps.col_ids == (0, 2)
        assert rows[0] == [0, 1] and cols[0] == [0, 1]


class TestDistinctBound:
    def test_identity(self):
        assert distinct_bound_check(IntegralMatrix.from_rows(np.eye(2, dtype=int), 1), 2)

    def test_all_ones(self):
        assert distinct_bound_check(IntegralMatrix.from_rows(np.ones((4, 4), dtype=int), 1), 1)

    def test_random_delta2(self, rng):
        for _ in range(100):
            M = IntegralMatrix(rng.integers(0, 3, (10, 10)), 2)
            assert distinct_bound_check(M)

    def test_false_when_rank_understated(self):
        assert not distinct_bound_check(IntegralMatrix.from_rows(np.eye(3, dtype=int), 1), 1)


class TestMonoStats:
    def test_all_zero(self):
        M = IntegralMatrix.from_rows(np.zeros((3, 3), dtype=int), 1)
        assert mono_stats(M, M.full_rect()) == (0, 1.0)

    def test_one_off_entry(self):
        A = np.zeros((3, 4), dtype=int)
        A[1, 2] = 1
        M = IntegralMatrix(A, 1)
        assert mono_stats(M, M.full_rect()) == (0, 11 / 12)

    def test_empty(self):
        M = IntegralMatrix.from_rows([[1]])
        with pytest.raises(EmptyRectangleError):
            mono_stats(M, Rectangle((), (0,)))

    def test_against_recount(self, rng):
        for _ in range(100):
            M = random_matrix(rng, max_rows=9)
            rows = tuple(sorted(rng.choice(M.n_rows, rng.integers(1, M.n_rows + 1), replace=False)))
            cols = tuple(sorted(rng.choice(M.n_cols, rng.integers(1, M.n_cols + 1), replace=False)))
            color, frac = mono_stats(M, Rectangle(rows, cols))
            counts = {}
            for a in rows:
                for b in cols:
                    counts[int(M.entries[a, b])] = counts.get(int(M.entries[a, b]), 0) + 1
            top = max(counts.values())
            assert counts[color] == top and color == min(c for c, n in counts.items() if n == top)
            assert frac == top / (len(rows) * len(cols))


def test_rectangle_rejects_duplicates():
    with pytest.raises(ValueError):
        Rectangle((0, 0), (1,))


def test_rank_subadditivity_with_rank1_corner(rng):
    # rank[R A] + rank[R; B] <= rank(S) + 3 whenever R has rank <= 1
    for _ in range(200):
        n, m = rng.integers(2, 9, 2)
        A = rng.integers(0, 3, (n, m))
        p, q = int(rng.integers(1, n + 1)), int(rng.integers(1, m + 1))
        A[:p, :q] = np.outer(rng.integers(0, 2, p), rng.integers(0, 2, q))
        M = IntegralMatrix(A, 2)
        top = rank_of(M, Rectangle(tuple(range(p)), tuple(range(m))))
        left = rank_of(M, Rectangle(tuple(range(n)), tuple(range(q))))
        assert top + left <= rank_of(M) + 3
