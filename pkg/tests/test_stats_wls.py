import math

import numpy as np
import pytest

from biasaudit.errors import ComputationError, ValidationError
from biasaudit.stats import DesignSpec, design_matrix, significance_stars, wls_fit
from biasaudit.stimuli import Entity


def ols_oracle(X, y):
    """Brute-force normal-equations OLS (test oracle only)."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    n, p = X.shape
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    sigma2 = float(resid @ resid) / (n - p)
    se = np.sqrt(sigma2 * np.diag(xtx_inv))
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / tss
    return beta, se, r2


class TestWlsFit:
    def test_exact_fit(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        X = np.column_stack([np.ones(4), x])
        fit = wls_fit(X, 2 * x + 3)
        assert fit.coefficients == pytest.approx([3.0, 2.0], abs=1e-12)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)
        assert fit.residual_se == pytest.approx(0.0, abs=1e-12)

    def test_unit_weights_match_ols_oracle(self):
        rng = np.random.default_rng(123)
        for _ in range(200):
            p = int(rng.integers(1, 5))
            n = int(rng.integers(p + 2, 13))
            X = np.column_stack([np.ones(n), rng.standard_normal((n, p - 1))]) \
                if p > 1 else np.ones((n, 1))
            y = rng.standard_normal(n)
            fit = wls_fit(X, y)
            beta, se, r2 = ols_oracle(X, y)
            assert fit.coefficients == pytest.approx(beta, abs=1e-8)
            assert fit.standard_errors == pytest.approx(se, abs=1e-8)
            assert fit.r2 == pytest.approx(r2, abs=1e-8)

    def test_four_point_weighted_hand_solve(self):
        X = np.column_stack([np.ones(4), [0.0, 1.0, 2.0, 3.0]])
        fit = wls_fit(X, [1.0, 2.0, 2.0, 4.0], [1.0, 2.0, 1.0, 2.0])
        assert fit.coefficients == pytest.approx([10 / 11, 21 / 22], abs=1e-8)
        assert fit.standard_errors == pytest.approx(
            [3 * math.sqrt(3) / 11, 3 * math.sqrt(3) / 22], abs=1e-8)
        assert fit.r2 == pytest.approx(49 / 55, abs=1e-8)
        assert fit.residual_se == pytest.approx(3 / math.sqrt(22), abs=1e-8)
        assert fit.df_resid == 2

    def test_weight_scale_invariance(self):
        rng = np.random.default_rng(5)
        X = np.column_stack([np.ones(10), rng.standard_normal((10, 2))])
        y = rng.standard_normal(10)
        w = rng.uniform(0.5, 4.0, 10)
        a = wls_fit(X, y, w)
        b = wls_fit(X, y, 17.3 * w)
        assert a.coefficients == pytest.approx(b.coefficients, abs=1e-8)
        assert a.standard_errors == pytest.approx(b.standard_errors, abs=1e-8)
        assert a.t_stats == pytest.approx(b.t_stats, abs=1e-8)
        assert a.r2 == pytest.approx(b.r2, abs=1e-8)

    def test_shift_equivariance(self):
        rng = np.random.default_rng(6)
        X = np.column_stack([np.ones(12), rng.standard_normal((12, 2))])
        y = rng.standard_normal(12)
        w = rng.uniform(1, 3, 12)
        a = wls_fit(X, y, w)
        b = wls_fit(X, y + 5.0, w)
        assert b.coefficients[0] == pytest.approx(a.coefficients[0] + 5.0, abs=1e-10)
        assert b.coefficients[1:] == pytest.approx(a.coefficients[1:], abs=1e-10)
        assert b.r2 == pytest.approx(a.r2, abs=1e-10)

    def test_adj_r2_below_r2(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(6, 15))
            X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
            y = rng.standard_normal(n)
            fit = wls_fit(X, y)
            assert fit.adj_r2 <= fit.r2 + 1e-12
            assert fit.adj_r2 == pytest.approx(
                1 - (1 - fit.r2) * (n - 1) / fit.df_resid, abs=1e-12)

    def test_singular_design_rejected(self):
        X = np.column_stack([np.ones(5), np.ones(5)])
        with pytest.raises(ComputationError, match="singular"):
            wls_fit(X, np.arange(5.0))

    def test_nonpositive_weight_rejected(self):
        X = np.ones((4, 1))
        with pytest.raises(ValidationError, match="positive"):
            wls_fit(X, np.arange(4.0), [1.0, 0.0, 1.0, 1.0])

    def test_constant_y_rejected(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        with pytest.raises(ComputationError, match="sum of squares"):
            wls_fit(X, np.ones(5))

    def test_too_few_observations(self):
        X = np.ones((2, 2))
        with pytest.raises(ValidationError, match="observations"):
            wls_fit(X, np.arange(2.0))


class TestStars:
    def test_convention(self):
        assert significance_stars(0.0004) == "***"
        assert significance_stars(0.03) == "**"
        assert significance_stars(0.07) == "*"
        assert significance_stars(0.2) == ""

    def test_boundaries_exclusive(self):
        assert significance_stars(0.01) == "**"
        assert significance_stars(0.05) == "*"
        assert significance_stars(0.1) == ""


def make_entity(i, party, gender=0, mentions=1, trust_raw=None, mmv=50.0):
    return Entity(id=f"e{i}", full_name=f"Imię Nazwisko{i}", surname=f"Nazwisko{i}",
                  party=party, gender=gender, mention_count=mentions,
                  trust_raw=trust_raw or [], mean_mention_valence=mmv)


class TestDesignMatrix:
    def test_ko_man_row(self):
        spec = DesignSpec(gender=True)
        entities = [make_entity(1, "KO"), make_entity(2, "ZP")]
        dm = design_matrix(entities, spec)
        assert dm.columns == ["intercept", "TD", "K", "KO", "Left", "gender"]
        assert dm.X[0].tolist() == [1, 0, 0, 1, 0, 0]

    def test_reference_row_all_zero_dummies(self):
        spec = DesignSpec(gender=True)
        dm = design_matrix([make_entity(1, "ZP"), make_entity(2, "KO")], spec)
        assert dm.X[0].tolist() == [1, 0, 0, 0, 0, 0]

    def test_zero_mention_entities_excluded(self):
        parties = ["ZP", "TD", "K", "KO", "Left"]
        entities = [make_entity(i, parties[i % 5], mentions=(0 if i < 2 else i))
                    for i in range(24)]
        dm = design_matrix(entities, DesignSpec())
        assert dm.X.shape[0] == 22
        assert len(dm.entity_ids) == 22
        assert dm.weights.min() > 0

    def test_weights_are_mention_counts(self):
        entities = [make_entity(1, "ZP", mentions=7), make_entity(2, "KO", mentions=3)]
        dm = design_matrix(entities, DesignSpec())
        assert dm.weights.tolist() == [7.0, 3.0]

    def test_trust_requested_but_absent(self):
        entities = [make_entity(1, "ZP"), make_entity(2, "KO")]
        with pytest.raises(ValidationError, match="trust"):
            design_matrix(entities, DesignSpec(trust=True))

    def test_mentions_confounder_requested_but_absent(self):
        entities = [make_entity(1, "ZP", mmv=None), make_entity(2, "KO")]
        with pytest.raises(ValidationError, match="mentions"):
            design_matrix(entities, DesignSpec(mentions=True))

    def test_trust_column_values(self):
        entities = [make_entity(1, "ZP", trust_raw=[(5, 5)]),
                    make_entity(2, "KO", trust_raw=[(5, 3)])]
        dm = design_matrix(entities, DesignSpec(trust=True))
        assert dm.columns == ["intercept", "TD", "K", "KO", "Left", "trust"]
        assert dm.X[:, -1].tolist() == [1.0, 0.5]

    def test_unknown_party_rejected(self):
        entities = [make_entity(1, "ZP"), make_entity(2, "KO")]
        spec = DesignSpec(parties=("ZP", "TD"))
        with pytest.raises(ValidationError, match="party"):
            design_matrix(entities, spec)

    def test_confound_only_design(self):
        entities = [make_entity(1, "ZP", gender=1), make_entity(2, "KO")]
        dm = design_matrix(entities, DesignSpec(affiliation=False, gender=True))
        assert dm.columns == ["intercept", "gender"]
        assert dm.X.tolist() == [[1, 1], [1, 0]]
