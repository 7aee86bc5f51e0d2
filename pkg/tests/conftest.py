from pathlib import Path

import numpy as np
import pytest

from logrank.matrix import IntegralMatrix, load_matrix

CORPUS = Path(__file__).parent / "corpus"


def corpus_paths():
    return sorted(p for p in CORPUS.iterdir() if p.suffix in (".csv", ".json"))


def corpus_matrices():
    return [(p.name, load_matrix(p)) for p in corpus_paths()]


def random_matrix(rng, max_rows=12, max_cols=None, max_delta=3, min_size=1):
    max_cols = max_cols or max_rows
    n = int(rng.integers(min_size, max_rows + 1))
    m = int(rng.integers(min_size, max_cols + 1))
    delta = int(rng.integers(1, max_delta + 1))
    return IntegralMatrix(rng.integers(0, delta + 1, (n, m)), delta)


def low_rank_matrix(rng, n, m, delta, terms):
    """Sum of 0/1 outer products, clipped into [0, delta]; tends to have low rank."""
    A = np.zeros((n, m), dtype=np.int64)
    for _ in range(terms):
        A += np.outer(rng.integers(0, 2, n), rng.integers(0, 2, m))
    return IntegralMatrix(np.minimum(A, delta), delta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
