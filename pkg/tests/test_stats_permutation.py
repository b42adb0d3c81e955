import itertools

import numpy as np
import pytest

from biasaudit.errors import ValidationError
from biasaudit.stats import permutation_indices, permutation_test


def fixture_n6():
    X = np.column_stack([np.ones(6), [0.3, 1.7, 2.2, 3.1, 4.9, 5.5]])
    y = np.array([0.7, 1.9, 1.6, 3.4, 4.2, 5.9])
    w = np.array([1.0, 2.0, 1.0, 3.0, 1.0, 2.0])
    return X, y, w


def enumeration_oracle(X, y, w):
    """Independent exhaustive permutation p via explicit normal equations."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    W = np.diag(w)

    def r2_of(yy):
        beta = np.linalg.solve(X.T @ W @ X, X.T @ W @ yy)
        resid = yy - X @ beta
        ssr = float(resid @ (w * resid))
        wmean = float(w @ yy / w.sum())
        tss = float(w @ (yy - wmean) ** 2)
        return 1.0 - ssr / tss

    r2_obs = r2_of(y)
    hits = 0
    total = 0
    for perm in itertools.permutations(range(len(y))):
        hits += r2_of(y[list(perm)]) >= r2_obs
        total += 1
    return hits / total


class TestPermutationTest:
    def test_constant_y_gives_one(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        assert permutation_test(X, np.full(5, 3.3), None, n_perm=100, seed=0) == 1.0

    def test_monte_carlo_close_to_exhaustive(self):
        X, y, w = fixture_n6()
        p_mc = permutation_test(X, y, w, n_perm=100_000, seed=42)
        p_ex = permutation_test(X, y, w, exhaustive=True)
        assert abs(p_mc - p_ex) < 0.01

    def test_exhaustive_matches_independent_oracle_exactly(self):
        X, y, w = fixture_n6()
        assert permutation_test(X, y, w, exhaustive=True) == enumeration_oracle(X, y, w)

    def test_two_well_separated_groups(self):
        group = np.repeat([0.0, 1.0], 6)
        X = np.column_stack([np.ones(12), group])
        rng = np.random.default_rng(8)
        y = group * 100.0 + rng.normal(0, 0.1, 12)
        p = permutation_test(X, y, None, n_perm=10_000, seed=1)
        assert p <= 0.01

    def test_deterministic_for_seed(self):
        X, y, w = fixture_n6()
        a = permutation_test(X, y, w, n_perm=2_000, seed=9)
        b = permutation_test(X, y, w, n_perm=2_000, seed=9)
        c = permutation_test(X, y, w, n_perm=2_000, seed=10)
        assert a == b
        assert a != c

    def test_chunking_does_not_change_p(self):
        X, y, w = fixture_n6()
        a = permutation_test(X, y, w, n_perm=3_000, seed=4, chunk_size=3_000)
        b = permutation_test(X, y, w, n_perm=3_000, seed=4, chunk_size=250)
        assert a == b

    def test_p_bounds(self):
        X, y, w = fixture_n6()
        for seed in range(5):
            p = permutation_test(X, y, w, n_perm=500, seed=seed)
            assert 1 / 501 <= p <= 1.0

    def test_shift_leaves_p_unchanged(self):
        X, y, w = fixture_n6()
        a = permutation_test(X, y, w, n_perm=2_000, seed=3)
        b = permutation_test(X, y + 7.5, w, n_perm=2_000, seed=3)
        assert a == b

    def test_exhaustive_limit_enforced(self):
        X = np.column_stack([np.ones(12), np.arange(12.0)])
        y = np.arange(12.0) + 0.1 * np.sin(np.arange(12))
        with pytest.raises(ValidationError, match="exhaustive"):
            permutation_test(X, y, None, exhaustive=True)

    def test_bad_n_perm(self):
        X, y, w = fixture_n6()
        with pytest.raises(ValidationError):
            permutation_test(X, y, w, n_perm=0, seed=1)


class TestPermutationIndices:
    def test_rows_are_permutations(self):
        P = permutation_indices(seed=3, start=0, count=200, n=9)
        expected = set(range(9))
        for row in P:
            assert set(row.tolist()) == expected

    def test_block_decomposition_matches(self):
        whole = permutation_indices(seed=3, start=0, count=100, n=7)
        first = permutation_indices(seed=3, start=0, count=60, n=7)
        second = permutation_indices(seed=3, start=60, count=40, n=7)
        assert np.array_equal(whole, np.vstack([first, second]))

    def test_streams_independent_per_index(self):
        a = permutation_indices(seed=3, start=5, count=1, n=8)
        b = permutation_indices(seed=3, start=5, count=1, n=8)
        assert np.array_equal(a, b)

    def test_uniform_over_positions(self):
        # each value should land in each position roughly uniformly
        n = 5
        P = permutation_indices(seed=11, start=0, count=20_000, n=n)
        counts = np.zeros((n, n))
        for pos in range(n):
            for value in range(n):
                counts[pos, value] = np.sum(P[:, pos] == value)
        expected = 20_000 / n
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # df = n*(n-1) = 20 -> 0.999 quantile ~ 45.3
        assert chi2 < 45.3
