import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finite_differences import StepPolicy, convergence_order, partials, second_partials


def cubic(x):
    return x[0] ** 3 + math.sin(x[1]) * x[0]


class TestPartials:
    def test_first_partials_match_closed_form(self):
        x = np.array([0.7, -1.3])
        d = partials(cubic, x)
        expected = [3 * 0.7 ** 2 + math.sin(-1.3), 0.7 * math.cos(-1.3)]
        np.testing.assert_allclose(d, expected, atol=1e-9)

    def test_second_partials_are_symmetric(self):
        x = np.array([0.4, 0.9])
        d2 = second_partials(cubic, x)
        assert d2.shape == (2, 2)
        np.testing.assert_allclose(d2, d2.T)
        np.testing.assert_allclose(d2[0, 1], math.cos(0.9), atol=1e-7)
        np.testing.assert_allclose(d2[0, 0], 6 * 0.4, atol=1e-7)

    def test_array_valued_functions_keep_their_shape(self):
        d = partials(lambda x: np.outer(x, x), np.array([1.0, 2.0]))
        assert d.shape == (2, 2, 2)
        np.testing.assert_allclose(d[0], [[2.0, 2.0], [2.0, 0.0]], atol=1e-8)

    def test_coarse_policy_disables_richardson(self):
        policy = StepPolicy().coarse(1e-2)
        assert policy.richardson is False
        assert policy.step == policy.second_step == 1e-2

    @given(st.floats(min_value=-3.0, max_value=3.0), st.floats(min_value=-3.0, max_value=3.0))
    @settings(max_examples=30, deadline=None)
    def test_exact_on_quadratics(self, a, b):
        d = partials(lambda x: a * x[0] ** 2 + b * x[0] * x[1], np.array([0.5, -0.25]))
        np.testing.assert_allclose(d, [a + b * -0.25, b * 0.5], atol=1e-8)


class TestConvergenceOrder:
    def test_second_order_ratio(self):
        assert convergence_order(4e-4, 1e-4, 2.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("coarse,fine", [(1e-14, 1e-6), (1e-6, 0.0), (None, 1e-3)])
    def test_roundoff_floor_gives_none(self, coarse, fine):
        assert convergence_order(coarse, fine) is None
