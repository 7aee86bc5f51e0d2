import json
from fractions import Fraction

import numpy as np
import pytest

from logrank.extension import (NonnegFactorization, PolytopePair, SlackError, WitnessError,
                               ksp_instance, lift, load_pair, mono_cover, nnmf_from_protocol,
                               random_ksp, simplex, slack_matrix, unit_square, xc_report)
from logrank.matrix import IntegralMatrix, rank_of
from logrank.protocol import build_protocol, verify_all

from conftest import random_matrix


def pipeline(pair):
    S = slack_matrix(pair)
    tree = build_protocol(S)
    stats = verify_all(tree)
    f = nnmf_from_protocol(tree)
    K = lift(pair, f)
    return S, tree, stats, f, K


def test_unit_square_slack():
    S = slack_matrix(unit_square())
    assert S.tolist() == [[1, 0, 1, 0], [0, 1, 0, 1], [1, 1, 0, 0], [0, 0, 1, 1]]
    assert rank_of(S) == 3 and S.delta == 1


def test_simplex_slack_is_identity():
    for n in range(1, 5):
        S = slack_matrix(simplex(n))
        assert rank_of(S) == n + 1
        assert S.entries.sum() == n + 1 and S.n_rows == S.n_cols == n + 1


def test_not_contained_rejected():
    with pytest.raises(ValueError):
        PolytopePair(1, [(2,)], [(1,)], [1])


def test_fractional_slack_rejected():
    pair = PolytopePair(1, [(Fraction(1, 2),)], [(1,)], [1])
    with pytest.raises(SlackError):
        slack_matrix(pair)


def test_slack_above_declared_delta():
    with pytest.raises(SlackError):
        slack_matrix(ksp_instance(2, 1, 2, [[1], [1]]), delta=1)


def test_ksp_small_example():
    # three singleton-or-shared sets over one element, each element used at most once
    pair = ksp_instance(3, 1, 1, [[1], [1], [1]])
    assert sorted(pair.vertices) == [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0)]
    assert pair.f == 1 + 3 + 3


def test_ksp_refuses_large_n():
    with pytest.raises(ValueError):
        ksp_instance(21, 2, 1, [[1]] * 21)


def test_ksp_slack_range():
    rng = np.random.default_rng(8)
    for _ in range(10):
        k = int(rng.integers(1, 3))
        pair = random_ksp(int(rng.integers(2, 7)), int(rng.integers(1, 21)), k, rng)
        S = slack_matrix(pair)
        assert S.entries.min() >= 0 and S.entries.max() <= k


@pytest.mark.parametrize("pair", [unit_square(), simplex(2), simplex(4),
                                  ksp_instance(3, 1, 1, [[1], [1], [1]]),
                                  ksp_instance(4, 3, 2, [[1, 2], [2, 3], [1, 3], [2]])],
                         ids=lambda p: p.name)
def test_pipeline(pair):
    S, tree, stats, f, K = pipeline(pair)
    assert np.all(f.U >= 0) and np.all(f.V >= 0)
    assert np.array_equal(f.U @ f.V, S.entries)
    assert len(K.witnesses) == pair.v
    for x, y in zip(pair.vertices, K.witnesses):
        assert K.contains(x, y)
    rep = xc_report(tree, pair, f)
    assert rep["lifted_dim"] == pair.n + f.inner_dim
    assert rep["inner_dim"] <= len(mono_cover(tree))


def test_lifted_points_satisfy_q():
    # K ⊆ Q: any y >= 0 with A x + U y = b gives A x <= b
    pair = unit_square()
    _, _, _, f, K = pipeline(pair)
    for x, y in zip(pair.vertices, K.witnesses):
        for row, bi in zip(pair.A, pair.b):
            assert sum(a * c for a, c in zip(row, x)) <= bi


def test_bad_factorization_rejected():
    pair = unit_square()
    S = slack_matrix(pair)
    U = S.entries.copy()
    V = np.eye(4, dtype=np.int64)
    V[0, 0] = 2
    with pytest.raises(WitnessError):
        lift(pair, NonnegFactorization(U, V, True, []))


def test_nnmf_random(rng):
    for _ in range(20):
        M = random_matrix(rng, 10)
        tree = build_protocol(M)
        f = nnmf_from_protocol(tree)
        assert np.array_equal(f.U @ f.V, M.entries)
        assert f.U.min() >= 0 and f.V.min() >= 0
        stats = verify_all(tree)
        assert f.inner_dim <= len(mono_cover(tree))
        assert f.inner_dim <= 2 ** (stats.max_bits + tree.payload_width)


def test_pair_json_round_trip(tmp_path):
    pair = ksp_instance(3, 2, 1, [[1], [1, 2], [2]])
    path = tmp_path / "pair.json"
    path.write_text(pair.dumps())
    again = load_pair(path)
    assert again.vertices == pair.vertices and again.A == pair.A and again.b == pair.b
    assert again.name == pair.name


def test_nnmf_zero_matrix_is_empty():
    tree = build_protocol(IntegralMatrix(np.zeros((3, 3), dtype=int), 1))
    f = nnmf_from_protocol(tree)
    assert f.inner_dim == 0 and np.array_equal(f.product(), np.zeros((3, 3)))


def test_nnmf_constant_matrix_single_term():
    tree = build_protocol(IntegralMatrix(np.full((3, 4), 2), 2))
    f = nnmf_from_protocol(tree)
    assert f.inner_dim == 1
    assert f.U[:, 0].tolist() == [2, 2, 2] and f.V[0].tolist() == [1, 1, 1, 1]


def test_square_slack_rank_flagged():
    pair = unit_square()
    tree = build_protocol(slack_matrix(pair))
    rep = xc_report(tree, pair)
    # slack is affine in the vertex, so rank n + 1 is possible and reported
    assert rep["slack_rank"] == 3 and rep["rank_exceeds_dimension"]
    assert rep["inner_dim"] <= len(mono_cover(tree))
