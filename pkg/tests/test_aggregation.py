"""Smooth maximum operators and the relaxed Heaviside."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trusscell.aggregation import ks_max, ks_weights, lks_max, lks_weights, smooth_heaviside, smooth_heaviside_grad

K = 25.0


def vectors(min_size=1, max_size=12, lo=-10.0, hi=10.0):
    return st.lists(
        st.floats(min_value=lo, max_value=hi, allow_nan=False), min_size=min_size, max_size=max_size
    ).map(np.array)


class TestKsMax:
    def test_single_value_is_identity(self):
        assert ks_max(np.array([0.37]), K) == pytest.approx(0.37, abs=1e-15)

    def test_two_zeros(self):
        assert ks_max(np.array([0.0, 0.0]), K) == pytest.approx(np.log(2.0) / 25.0, abs=1e-15)
        assert ks_max(np.array([0.0, 0.0]), K) == pytest.approx(0.027726, abs=1e-6)

    def test_one_zero_pair_is_nearly_exact(self):
        expected = 1.0 + np.log(1.0 + np.exp(-25.0)) / 25.0
        assert ks_max(np.array([1.0, 0.0]), K) == pytest.approx(expected, abs=1e-15)
        assert abs(ks_max(np.array([1.0, 0.0]), K) - 1.0) < 1e-11

    def test_empty_vector_rejected(self):
        with pytest.raises(ValueError):
            ks_max(np.array([]), K)

    def test_overflow_safety(self):
        big = np.array([1e4, 1e4 - 1.0])
        assert np.isfinite(ks_max(big, K))
        assert ks_max(big, K) == pytest.approx(1e4 + np.log(1 + np.exp(-25.0)) / 25.0, rel=1e-12)

    @settings(max_examples=1000, deadline=None)
    @given(vectors())
    def test_bracketing_bounds(self, x):
        val = ks_max(x, K)
        assert np.max(x) - 1e-12 <= val <= np.max(x) + np.log(len(x)) / K + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(vectors())
    def test_weights_are_a_convex_combination(self, x):
        w = ks_weights(x, K)
        assert np.all(w >= 0.0)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-12)

    def test_axis_reduction(self):
        x = np.array([[0.0, 1.0, 2.0], [2.0, 1.0, 0.0]])
        col = ks_max(x, K, axis=0)
        assert col.shape == (3,)
        assert col[1] == pytest.approx(1.0 + np.log(2.0) / K, abs=1e-14)


class TestLksMax:
    def test_constant_vector_is_exact(self):
        for n in (1, 2, 7):
            assert lks_max(np.full(n, 0.4), K) == pytest.approx(0.4, abs=1e-14)

    def test_two_zeros_is_exactly_zero(self):
        assert lks_max(np.array([0.0, 0.0]), K) == 0.0

    def test_closed_form_pair(self):
        expected = 0.1 + np.log((1.0 + np.exp(-15.0)) / 2.0) / 25.0
        got = lks_max(np.array([0.1, -0.5]), K)
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(0.072274, abs=1e-6)

    @settings(max_examples=1000, deadline=None)
    @given(vectors())
    def test_lower_bounds_the_maximum(self, x):
        assert lks_max(x, K) <= np.max(x) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(vectors())
    def test_lks_weights_match_ks_weights(self, x):
        # the 1/n factor is constant, so the softmax is identical
        np.testing.assert_allclose(lks_weights(x, K), ks_weights(x, K), atol=1e-14)


class TestSmoothHeaviside:
    EPS = 0.13
    P = 2.0

    def test_below_band_is_zero(self):
        assert smooth_heaviside(-2.0 * self.EPS, self.EPS, self.P) == 0.0
        assert smooth_heaviside(-self.EPS, self.EPS, self.P) == 0.0

    def test_midpoint_with_quadratic_exponent(self):
        assert smooth_heaviside(0.0, self.EPS, 2.0) == pytest.approx(0.25, abs=1e-15)

    def test_band_edge_is_one_for_any_exponent(self):
        for p in (1.0, 2.0, 3.5):
            assert smooth_heaviside(self.EPS, self.EPS, p) == pytest.approx(1.0, abs=1e-15)
            assert smooth_heaviside(2.0 * self.EPS, self.EPS, p) == 1.0

    @settings(max_examples=300, deadline=None)
    @given(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
    )
    def test_monotone_non_decreasing(self, x1, x2):
        lo, hi = min(x1, x2), max(x1, x2)
        assert smooth_heaviside(lo, self.EPS, self.P) <= smooth_heaviside(hi, self.EPS, self.P) + 1e-15

    @settings(max_examples=300, deadline=None)
    @given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
    def test_range(self, x):
        v = smooth_heaviside(x, self.EPS, self.P)
        assert 0.0 <= v <= 1.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        h = 1e-7
        # stay clear of the +/-eps C1 joints where FD convergence degrades
        xs = rng.uniform(-0.95 * self.EPS, 0.95 * self.EPS, size=60)
        for x in xs:
            fd = (
                smooth_heaviside(x + h, self.EPS, self.P) - smooth_heaviside(x - h, self.EPS, self.P)
            ) / (2 * h)
            an = smooth_heaviside_grad(x, self.EPS, self.P)
            assert an == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_gradient_vanishes_outside_band(self):
        assert smooth_heaviside_grad(-1.5 * self.EPS, self.EPS, self.P) == 0.0
        assert smooth_heaviside_grad(1.5 * self.EPS, self.EPS, self.P) == 0.0

    def test_c1_at_band_edges(self):
        # one-sided slopes on both sides of +/-eps agree to O(h)
        h = 1e-8
        for edge in (-self.EPS, self.EPS):
            inner = smooth_heaviside_grad(edge - np.sign(edge) * h, self.EPS, self.P)
            assert inner == pytest.approx(0.0, abs=1e-6)
