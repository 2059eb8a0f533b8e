import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltbound.ensemble import BLOCK, Accumulator, default_cap, merge_all, simulate_ensemble
from ltbound.errors import AllPathsCapped, CapReached
from ltbound.stopping import FirstExit, FirstHit, TimeCap, TwoStage

samples = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=0, max_size=40)


class TestAccumulator:
    def test_from_values(self):
        acc = Accumulator.from_values([1.0, 2.0, 3.0, 4.0])
        assert acc.count == 4 and acc.mean == 2.5
        assert acc.variance == pytest.approx(np.var([1, 2, 3, 4], ddof=1))
        assert acc.std_error == pytest.approx(math.sqrt(acc.variance / 4))

    def test_empty(self):
        acc = Accumulator.from_values([])
        assert acc.count == 0 and math.isnan(acc.std_error)
        assert acc.merge(Accumulator.from_values([1.0])).mean == 1.0

    @given(samples, samples)
    def test_merge_matches_pooled(self, a, b):
        merged = Accumulator.from_values(a).merge(Accumulator.from_values(b))
        pooled = Accumulator.from_values(a + b)
        assert merged.count == pooled.count
        assert merged.mean == pytest.approx(pooled.mean, rel=1e-12, abs=1e-9)
        assert merged.m2 == pytest.approx(pooled.m2, rel=1e-9, abs=1e-6)

    @given(samples, samples, samples)
    def test_merge_associative(self, a, b, c):
        x, y, z = (Accumulator.from_values(v) for v in (a, b, c))
        left = x.merge(y).merge(z)
        right = x.merge(y.merge(z))
        assert left.count == right.count
        scale = 1.0 + max((abs(v) for v in a + b + c), default=0.0)
        assert abs(left.mean - right.mean) <= 1e-13 * scale
        assert abs(left.m2 - right.m2) <= 1e-13 * scale**2 * max(1, left.count)

    def test_merge_all_and_scaled(self):
        parts = [Accumulator.from_values([i, i + 1.0]) for i in range(5)]
        total = merge_all(parts)
        assert total.count == 10 and total.mean == pytest.approx(2.5)
        assert total.scaled(2.0).mean == pytest.approx(5.0)
        assert total.scaled(2.0).variance == pytest.approx(4 * total.variance)


class TestSimulateEnsemble:
    def test_deterministic(self):
        rule = FirstExit.from_ab(1.0, 1.0)
        a = simulate_ensemble(rule, [0.0, 0.5], 700, 1e-3, 0.05, seed=3)
        b = simulate_ensemble(rule, [0.0, 0.5], 700, 1e-3, 0.05, seed=3)
        assert a == b

    def test_seed_matters(self):
        rule = FirstExit.from_ab(1.0, 1.0)
        a = simulate_ensemble(rule, [0.0], 200, 1e-3, 0.05, seed=3)
        b = simulate_ensemble(rule, [0.0], 200, 1e-3, 0.05, seed=4)
        assert a.occupation[0].mean != b.occupation[0].mean

    def test_worker_count_does_not_change_results(self):
        rule = TwoStage(0.75, -0.5, 1.25)
        n = 2 * BLOCK + 37
        one = simulate_ensemble(rule, [0.75], n, 2e-3, 0.05, seed=12, workers=1)
        three = simulate_ensemble(rule, [0.75], n, 2e-3, 0.05, seed=12, workers=3)
        assert one == three

    def test_terminal_counts(self):
        ens = simulate_ensemble(FirstExit.from_ab(1.0, 2.0), [0.0], 400, 1e-3, 0.05, seed=1)
        assert set(ens.terminal_counts) == {-1.0, 2.0}
        assert sum(ens.terminal_counts.values()) == 400

    def test_windows(self):
        ens = simulate_ensemble(FirstExit.from_ab(1.0, 1.0), [0.0], 300, 1e-3, 0.05, seed=2,
                                windows=[(0.0, 0.5), (-0.5, 0.5)])
        assert len(ens.window_counts) == 2
        assert ens.window_counts[0].mean >= ens.window_counts[1].mean

    def test_capped_paths_excluded_and_reported(self):
        rule = TimeCap(FirstHit(0.3), 0.05)
        with pytest.warns(CapReached):
            ens = simulate_ensemble(rule, [0.0], 200, 1e-3, 0.05, seed=0)
        assert 0 < ens.n_capped < 200
        assert ens.tau.count == 200 - ens.n_capped
        assert ens.capped_fraction == ens.n_capped / 200

    def test_all_capped(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CapReached)
            with pytest.raises(AllPathsCapped):
                simulate_ensemble(FirstHit(50.0), [0.0], 20, 1e-2, 0.05, cap=0.1)

    def test_default_cap(self):
        assert default_cap(FirstExit.from_ab(1.0, 2.0)) == pytest.approx(128.0)
        with pytest.raises(ValueError):
            default_cap(FirstHit(1.0))

    @pytest.mark.parametrize("kwargs", [dict(n_paths=1), dict(dt=0.0), dict(epsilon=-1.0),
                                        dict(cap=1e-5)])
    def test_validation(self, kwargs):
        args = dict(rule=FirstExit.from_ab(1, 1), xs=[0.0], n_paths=10, dt=1e-3, epsilon=0.05)
        args.update(kwargs)
        with pytest.raises(ValueError):
            simulate_ensemble(**args)
