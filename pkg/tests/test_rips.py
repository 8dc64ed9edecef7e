from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scvolterra.io import InputError
from scvolterra.rips import RcConfig, correlation_matrix, rc_from_correlation, rc_infer


def noisy(n=6, r=200, seed=0):
    return np.random.default_rng(seed).normal(size=(n, r))


class TestCorrelation:
    def test_scaled_copy(self):
        x = noisy(3)
        x[1] = 2 * x[0]
        assert correlation_matrix(x)[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_negated_copy(self):
        x = noisy(3)
        x[2] = -x[0]
        assert correlation_matrix(x)[0, 2] == pytest.approx(-1.0, abs=1e-12)

    def test_independent_rows(self):
        c = correlation_matrix(np.random.default_rng(1).normal(size=(5, 10_000)))
        off = c[~np.eye(5, dtype=bool)]
        assert np.all(np.abs(off) < 0.05)

    def test_against_numpy(self):
        x = noisy(5, 50, seed=2)
        np.testing.assert_allclose(correlation_matrix(x), np.corrcoef(x), atol=1e-12)

    def test_properties(self):
        c = correlation_matrix(noisy(7, 30))
        assert np.array_equal(c, c.T)
        assert np.all(np.diag(c) == 1.0) and np.all(np.abs(c) <= 1.0)

    def test_zero_variance_named(self):
        x = noisy(4)
        x[2] = 3.0
        with pytest.raises(InputError, match="node 2"):
            correlation_matrix(x)

    def test_needs_two_samples(self):
        with pytest.raises(InputError):
            correlation_matrix(np.ones((3, 1)))


class TestRcInfer:
    def test_zero_threshold_complete(self):
        n = 6
        sc, h1, h2 = rc_infer(noisy(n), RcConfig(threshold=0.0))
        assert len(sc.edges) == comb(n, 2) and len(sc.triangles) == comb(n, 3)
        assert np.all(h1.values[~np.eye(n, dtype=bool)] > 0)

    def test_threshold_one_empty(self):
        sc, h1, h2 = rc_infer(noisy(), RcConfig(threshold=1.0))
        assert not sc.edges and not sc.triangles
        assert not np.any(h1.values) and not np.any(h2.values)

    def test_closure_fails(self):
        corr = np.array([[1.0, 0.9, 0.8], [0.9, 1.0, 0.2], [0.8, 0.2, 1.0]])
        sc, _, _ = rc_from_correlation(corr, RcConfig(threshold=0.5))
        assert set(sc.edges) == {(0, 1), (0, 2)} and not sc.triangles

    @pytest.mark.parametrize("rule,expected", [("min", 0.7), ("product", 0.9 * 0.8 * 0.7)])
    def test_weight_rule(self, rule, expected):
        corr = np.array([[1.0, 0.9, -0.8], [0.9, 1.0, 0.7], [-0.8, 0.7, 1.0]])
        sc, h1, h2 = rc_from_correlation(corr, RcConfig(threshold=0.5, weight_rule=rule))
        assert sc.triangles[(0, 1, 2)] == pytest.approx(expected)
        assert sc.edges[(0, 2)] == pytest.approx(0.8)
        assert np.count_nonzero(h2.values) == 6
        assert set(h2.values[h2.values > 0]) == {sc.triangles[(0, 1, 2)]}

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_threshold(self, seed, e1, e2):
        lo, hi = sorted((e1, e2))
        x = noisy(6, 15, seed)
        a, _, _ = rc_infer(x, RcConfig(lo))
        b, _, _ = rc_infer(x, RcConfig(hi))
        assert set(b.edges) <= set(a.edges)
        assert set(b.triangles) <= set(a.triangles)
        for i, j, k in a.triangles:
            assert {(i, j), (i, k), (j, k)} <= set(a.edges)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6), st.integers(0, 5), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, seed, node, scale):
        x = noisy(6, 20, seed)
        y = x.copy()
        y[node] *= scale
        a, _, _ = rc_infer(x, RcConfig(0.3))
        b, _, _ = rc_infer(y, RcConfig(0.3))
        assert set(a.edges) == set(b.edges) and set(a.triangles) == set(b.triangles)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            RcConfig(threshold=1.5)
        with pytest.raises(ValueError):
            RcConfig(weight_rule="mean")
