import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltbound import distributions as d
from ltbound.brownian import PathGrid, run_kernel, simulate_path
from ltbound.bounds import sharp_bound
from ltbound.ensemble import simulate_ensemble
from ltbound.errors import NonZeroMean
from ltbound.localtime import (
    EXACT,
    LocalTimeEstimate,
    OCCUPATION,
    UPCROSSING,
    count_upcrossings,
    default_epsilon,
    estimate_occupation,
    estimate_via_upcrossings,
    exact_expected_local_time,
    mc_expected_local_time,
    upcrossing_scale,
    upcrossing_window,
)
from ltbound.stopping import FirstExit, TwoStage, compile_rule
from ltbound.streams import make_generator

from strategies import levels, mean_zero_laws, rational_laws


def grid(values, dt=1.0):
    values = np.asarray(values, dtype=float)
    return PathGrid(dt, values, len(values) - 1)


class TestExactEvaluator:
    @pytest.mark.parametrize("law, x, expected", [
        (d.TwoPointOptimal(0.75, 1.0), 0.75, 0.5),
        (d.FirstExit(1.0, 1.0), 0.0, 1.0),
        (d.FirstExit(1.0, 2.0), 1.0, 2 / 3),
        (d.Normal(1.0), 0.0, math.sqrt(2 / math.pi)),
        (d.ShiftedExponential(1.0), 1.0, 2 * math.exp(-2)),
        (d.point_mass(0), 0.3, 0.0),
    ])
    def test_examples(self, law, x, expected):
        assert exact_expected_local_time(law, x) == pytest.approx(expected, abs=1e-15)

    def test_exact_fraction(self):
        law = d.FiniteSupport(((-1, Fraction(1, 4)), (0, Fraction(1, 2)), (1, Fraction(1, 4))))
        assert exact_expected_local_time(law, 0) == Fraction(1, 2)
        assert exact_expected_local_time(law, Fraction(1, 2)) == Fraction(1, 4)

    def test_nonzero_mean(self):
        with pytest.raises(NonZeroMean) as exc:
            exact_expected_local_time(d.FiniteSupport(((-1, 0.3), (1, 0.7))), 0.0)
        assert exc.value.mean == pytest.approx(0.4)

    @given(mean_zero_laws(), levels)
    def test_three_expressions_agree(self, law, x):
        via_potential = d.potential(law)(x) - abs(x)
        pos, neg = 2 * law.positive_part(x), 2 * law.negative_part(x)
        value = exact_expected_local_time(law, x)
        assert value == pytest.approx(via_potential, abs=1e-12)
        assert value == (pos if x >= 0 else neg)
        if x == 0:
            assert pos == pytest.approx(neg, abs=1e-12)

    @given(rational_laws(), st.fractions(-7, 7))
    def test_three_expressions_exact(self, law, x):
        assert exact_expected_local_time(law, x) == d.potential(law)(x) - abs(x)

    @given(mean_zero_laws(), st.floats(0, 6), st.floats(0, 6))
    def test_unimodal(self, law, x1, x2):
        lo, hi = sorted((x1, x2))
        assert exact_expected_local_time(law, hi) <= exact_expected_local_time(law, lo) + 1e-12
        assert exact_expected_local_time(law, -hi) <= exact_expected_local_time(law, -lo) + 1e-12

    @given(mean_zero_laws(), levels)
    def test_dominated(self, law, x):
        sigma = math.sqrt(law.variance())
        assert exact_expected_local_time(law, x) <= sharp_bound(x, sigma) + 1e-12

    @given(mean_zero_laws(), levels)
    def test_nonnegative(self, law, x):
        assert exact_expected_local_time(law, x) >= 0


class TestOccupation:
    def test_never_near(self):
        assert estimate_occupation(grid([0.0, 0.0]), 5.0, 0.1) == 0.0

    def test_direct_count(self):
        assert estimate_occupation(grid([0.0, 0.0]), 0.0, 1.0) == 1.0

    def test_strict_window(self):
        assert estimate_occupation(grid([0.0, 1.0, 2.0]), 1.0, 1.0) == 0.5

    def test_only_up_to_stopping_index(self):
        path = PathGrid(1.0, np.array([0.0, 0.0, 0.0]), 1)
        assert estimate_occupation(path, 0.0, 1.0) == 1.0

    def test_rejects_epsilon(self):
        with pytest.raises(ValueError):
            estimate_occupation(grid([0.0]), 0.0, 0.0)

    @pytest.mark.parametrize("dt, expected", [(1e-4, 0.05), (1e-2, 0.5), (1e-6, 0.005)])
    def test_default_epsilon(self, dt, expected):
        assert default_epsilon(dt) == pytest.approx(max(expected, dt**0.4))


class TestUpcrossings:
    @pytest.mark.parametrize("values, expected", [
        ([0, 1], 1),
        ([0, 1, 0, 1], 2),
        ([0, -0.5, -1, -2], 0),
        ([0.5, 1, 0.1, 0.9], 1),  # starts inside: first upcrossing needs a visit below
        ([0, 0.5, 0.1, 0.7, 0.9], 1),
        ([0.2, 0.8], 1),  # touching the levels counts
    ])
    def test_counts(self, values, expected):
        assert count_upcrossings(grid(values), 0.2, 0.8) == expected

    def test_never_reaching(self):
        assert estimate_via_upcrossings(grid([0.0, -0.1, -0.3]), 1.0, 0.1) == 0.0

    def test_window_mirrors(self):
        assert upcrossing_window(0.5, 0.02) == (0.5, 0.52)
        assert upcrossing_window(-0.5, 0.02) == (-0.52, -0.5)

    def test_scale(self):
        assert upcrossing_scale(0.02) == 0.04
        assert upcrossing_scale(0.02, 1e-4) == pytest.approx(2 * (0.02 + 2 * 0.5825971579390106 * 0.01))

    def test_uncorrected(self):
        path = grid([0.0, 1.0, 0.0, 1.0], dt=1e-4)
        assert estimate_via_upcrossings(path, 0.0, 0.5, grid_correction=False) == 2.0

    def test_bad_window(self):
        with pytest.raises(ValueError):
            count_upcrossings(grid([0, 1]), 1.0, 1.0)


@pytest.mark.parametrize("rule", [FirstExit.from_ab(1.0, 1.0), TwoStage(0.75, -0.5, 1.25)],
                         ids=["exit", "twostage"])
@pytest.mark.parametrize("stream", range(5))
def test_fused_kernel_matches_numpy_estimators(rule, stream):
    dt, eps = 1e-3, 0.05
    xs = np.array([-0.5, 0.0, 0.25, 0.75])
    wins = [upcrossing_window(float(x), eps) for x in xs]
    lo = np.array([w[0] for w in wins])
    hi = np.array([w[1] for w in wins])
    k, _, _, occ, ups, buf = run_kernel(compile_rule(rule), dt, 10**6, make_generator(4, stream),
                                        xs, eps, lo, hi, record=True)
    path = PathGrid(dt, buf, k)
    for j, x in enumerate(xs):
        assert occ[j] * dt / (2 * eps) == estimate_occupation(path, x, eps)
        assert ups[j] == count_upcrossings(path, lo[j], hi[j])


def test_ensemble_means_match_per_path_estimates():
    rule, dt, eps, n = FirstExit.from_ab(1.0, 1.0), 1e-3, 0.05, 60
    ens = simulate_ensemble(rule, [0.0, 0.5], n, dt, eps, seed=21, cap=64.0)
    paths = [simulate_path(rule, dt, 64.0, make_generator(21, i)) for i in range(n)]
    for j, x in enumerate((0.0, 0.5)):
        occ = [estimate_occupation(p, x, eps) for p in paths]
        up = [estimate_via_upcrossings(p, x, eps) for p in paths]
        assert ens.occupation[j].mean == pytest.approx(np.mean(occ), rel=1e-12)
        assert ens.upcrossing[j].mean == pytest.approx(np.mean(up), rel=1e-12)
        assert ens.occupation[j].std_error == pytest.approx(np.std(occ, ddof=1) / math.sqrt(n), rel=1e-9)
    assert ens.tau.mean == pytest.approx(np.mean([p.tau for p in paths]), rel=1e-12)


def test_mc_two_paths():
    est = mc_expected_local_time(FirstExit.from_ab(1.0, 1.0), 0.0, 2, 1e-3, seed=1)
    assert est.n_paths == 2 and math.isfinite(est.std_error) and est.value >= 0
    assert est.method == OCCUPATION


def test_mc_rejects_bad_method():
    with pytest.raises(ValueError):
        mc_expected_local_time(FirstExit.from_ab(1.0, 1.0), 0.0, 10, 1e-3, method="exact")


# --- full-size Monte Carlo checks (shared ensemble) -----------------------------

OCC_TOL, UP_TOL = 0.03, 0.05


@pytest.mark.parametrize("x, exact", [(0.0, 1.0), (0.5, 0.5), (-0.5, 0.5)])
def test_occupation_estimate(symmetric_exit_summary, x, exact):
    row = symmetric_exit_summary.rows_for(x, OCCUPATION)[0]
    assert row.exact == exact
    assert abs(row.estimate - exact) <= 3 * row.std_error + OCC_TOL


@pytest.mark.parametrize("x, exact", [(0.0, 1.0), (0.5, 0.5), (-0.5, 0.5)])
def test_upcrossing_estimate(symmetric_exit_summary, x, exact):
    row = symmetric_exit_summary.rows_for(x, UPCROSSING)[0]
    assert abs(row.estimate - exact) <= 3 * row.std_error + UP_TOL


@pytest.mark.parametrize("x", [-0.5, 0.0, 0.5])
def test_estimators_agree(symmetric_exit_summary, x):
    occ = symmetric_exit_summary.rows_for(x, OCCUPATION)[0]
    up = symmetric_exit_summary.rows_for(x, UPCROSSING)[0]
    assert abs(occ.estimate - up.estimate) <= 3 * math.hypot(occ.std_error, up.std_error) + 0.05


def test_estimate_records():
    est = LocalTimeEstimate.exact(d.FirstExit(1.0, 1.0), 0.0)
    assert (est.value, est.std_error, est.method, est.epsilon) == (1.0, 0.0, EXACT, None)
    assert est.confidence_interval() == (1.0, 1.0)
    mc = LocalTimeEstimate(0.0, 1.0, 0.1, 100, OCCUPATION, 0.02)
    assert mc.confidence_interval(2.0) == pytest.approx((0.8, 1.2))
