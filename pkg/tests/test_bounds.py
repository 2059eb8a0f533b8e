import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltbound import bounds as b
from ltbound import distributions as d
from ltbound.errors import NegativeX, OutOfInterval, OutOfRegime
from ltbound.localtime import exact_expected_local_time

from strategies import levels, mean_zero_laws, sigmas


class TestSharpBound:
    @pytest.mark.parametrize("sigma", [0.1, 1.0, 2.5, 40.0])
    def test_at_zero_is_sigma(self, sigma):
        assert b.sharp_bound(0.0, sigma) == sigma

    def test_dichotomous_example(self):
        assert b.sharp_bound(0.75, 1.0) == 0.5

    def test_large_x(self):
        value = b.sharp_bound(100.0, 1.0)
        assert value == pytest.approx(1 / (math.sqrt(10001) + 100), rel=1e-6)
        assert abs(value - 1 / 200) < 2.5e-5

    @pytest.mark.parametrize("x", [10.0, 1e3, 1e5, 1e7])
    def test_rationalized_form_is_accurate(self, x):
        with mpmath.workdps(50):
            ref = float(mpmath.sqrt(1 + mpmath.mpf(x) ** 2) - x)
        assert b.sharp_bound(x, 1.0) == pytest.approx(ref, rel=1e-14)
        # the subtractive form degrades as x grows
        if x >= 1e7:
            assert abs(b.sharp_bound_subtractive(x, 1.0) - ref) / ref > 1e-6

    @given(levels, sigmas)
    def test_even(self, x, sigma):
        assert b.sharp_bound(x, sigma) == b.sharp_bound(-x, sigma)

    @given(st.floats(0, 100), st.floats(1e-3, 50), sigmas)
    def test_strictly_decreasing_in_abs_x(self, x, dx, sigma):
        assert b.sharp_bound(x + dx, sigma) < b.sharp_bound(x, sigma)

    def test_asymptote(self):
        assert 1e4 * b.sharp_bound(1e4, 1.0) == pytest.approx(0.5, abs=1e-4)
        assert 1e6 * b.sharp_bound(1e6, 2.0) == pytest.approx(2.0, abs=1e-6)

    def test_vectorized(self):
        xs = np.array([-2.0, 0.0, 0.75])
        assert np.allclose(b.sharp_bound(xs, 1.0), [b.sharp_bound(float(x), 1.0) for x in xs])

    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.nan])
    def test_rejects_sigma(self, sigma):
        with pytest.raises(ValueError):
            b.sharp_bound(0.0, sigma)


class TestUpcrossingBound:
    def test_examples(self):
        assert b.upcrossing_bound(0.0, 1.0, 1.0) == 0.5
        assert b.upcrossing_bound(0.0, 2.0, 2.0) == 0.5
        assert b.upcrossing_bound(0.75, 1.25, 1.0) == 0.5

    @given(st.floats(-3, 3), st.floats(0.01, 0.999), sigmas)
    def test_identity(self, x, frac, sigma):
        bb = x + frac * sigma
        if bb <= x:
            return
        assert 2 * (bb - x) * b.upcrossing_bound(x, bb, sigma) == pytest.approx(b.sharp_bound(x, sigma))

    def test_out_of_regime(self):
        with pytest.raises(OutOfRegime):
            b.upcrossing_bound(0.0, 2.0, 1.0)

    def test_needs_b_above_x(self):
        with pytest.raises(ValueError):
            b.upcrossing_bound(1.0, 1.0, 1.0)


class TestClosedForms:
    @pytest.mark.parametrize("a, bb, x, expected", [
        (1, 1, 0, 1.0),
        (1, 4, 0, 8 / 5),
        (1, 2, 1, 2 / 3),
        (2, 3, 3, 0.0),
        (2, 3, -2, 0.0),
    ])
    def test_first_exit(self, a, bb, x, expected):
        assert b.closed_form_first_exit(a, bb, x) == pytest.approx(expected, abs=1e-15)

    def test_first_exit_outside(self):
        with pytest.raises(OutOfInterval):
            b.closed_form_first_exit(1, 1, 1.5)

    @given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0, 1))
    def test_first_exit_linear_pieces(self, a, bb, t):
        # linear on [0, b] and on [-a, 0], vanishing at the endpoints
        top = b.closed_form_first_exit(a, bb, 0.0)
        assert b.closed_form_first_exit(a, bb, t * bb) == pytest.approx(top * (1 - t), abs=1e-12)
        assert b.closed_form_first_exit(a, bb, -t * a) == pytest.approx(top * (1 - t), abs=1e-12)

    @given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0, 1))
    def test_first_exit_matches_exact(self, a, bb, t):
        x = min(max(-a + t * (a + bb), -a), bb)
        exact = exact_expected_local_time(d.FirstExit(a, bb), x)
        assert exact == pytest.approx(b.closed_form_first_exit(a, bb, x), abs=1e-12)

    def test_first_exit_exact_rational(self):
        exact = exact_expected_local_time(d.FirstExit(1, 2), 1)
        assert exact == Fraction(2, 3)

    def test_normal(self):
        assert b.closed_form_normal(1.0, 0.0) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-15)
        assert b.closed_form_normal(2.0, 0.0) == pytest.approx(2 * math.sqrt(2 / math.pi), abs=1e-15)

    def test_normal_tail_by_quadrature(self):
        from scipy import integrate, stats

        ref = 2 * integrate.quad(lambda z: (z - 5) * stats.norm.pdf(z), 5, np.inf,
                                 epsabs=1e-14)[0]
        value = b.closed_form_normal(1.0, 5.0)
        assert value == pytest.approx(ref, rel=1e-8)
        assert value < b.sharp_bound(5.0, 1.0)

    @given(st.floats(-8, 8), sigmas)
    def test_normal_standardized_form(self, x, sigma):
        # E[L_x] = 2 E[(sigma Z - x)^+] for x >= 0, mirrored for x < 0
        assert b.closed_form_normal(sigma, x) == pytest.approx(
            exact_expected_local_time(d.Normal(sigma), x), rel=1e-12, abs=1e-300)

    def test_exponential(self):
        assert b.closed_form_exponential(1.0, 0.0) == pytest.approx(2 / math.e, abs=1e-15)
        assert b.closed_form_exponential(1.0, 1.0) == pytest.approx(2 * math.exp(-2), abs=1e-15)

    @given(st.floats(0, 30), sigmas)
    def test_exponential_below_sigma(self, x, sigma):
        assert b.closed_form_exponential(sigma, x) < sigma
        assert b.closed_form_exponential(sigma, x) == pytest.approx(
            exact_expected_local_time(d.ShiftedExponential(sigma), x), rel=1e-12, abs=1e-300)

    def test_exponential_negative_x(self):
        with pytest.raises(NegativeX):
            b.closed_form_exponential(1.0, -0.1)


class TestDominance:
    @given(levels, sigmas)
    def test_named_families(self, x, sigma):
        bound = b.sharp_bound(x, sigma)
        assert b.closed_form_normal(sigma, x) <= bound + 1e-12
        if x >= 0:
            assert b.closed_form_exponential(sigma, x) <= bound + 1e-12

    @given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0, 1))
    def test_first_exit(self, a, bb, t):
        x = min(max(-a + t * (a + bb), -a), bb)
        assert b.closed_form_first_exit(a, bb, x) <= b.sharp_bound(x, math.sqrt(a * bb)) + 1e-12

    @given(mean_zero_laws(), levels)
    def test_finite_laws(self, law, x):
        report = b.report_exact(law, x)
        assert report.source == "exact"
        assert report.within_bound()

    @given(levels, sigmas)
    def test_attained_by_two_point_law(self, x, sigma):
        exact = exact_expected_local_time(d.TwoPointOptimal(x, sigma), x)
        assert exact == pytest.approx(b.sharp_bound(x, sigma), abs=1e-12 * max(1.0, sigma))


def test_bound_curve():
    curve = b.bound_curve(1.0, [0, 0.5, 1, 2])
    assert [x for x, _ in curve] == [0, 0.5, 1, 2]
    assert [round(v, 6) for _, v in curve] == [1, 0.618034, 0.414214, 0.236068]
