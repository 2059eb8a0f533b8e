"""Acceptance checks for a build, runnable from the CLI (``ltbound verify``) and pytest.

Each check returns a :class:`CriterionResult`; tolerances are fixed here and
are not tuned per run. ``quick=True`` shrinks the Monte Carlo path counts (the
statistical bands widen accordingly) for a fast smoke run.
"""

import math
import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import bounds, distributions as dist, embedding, stopping
from .harness import ExperimentSpec, run_experiment
from .localtime import OCCUPATION, UPCROSSING, exact_expected_local_time

N_PATHS = 50_000
N_PATHS_QUICK = 5_000
DT = 1e-4
EPS = 0.02
SEED = 20190601

EXACT_TOL = 1e-12
OCC_ALLOW = 0.03
UP_ALLOW = 0.05


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f} s)"


def random_laws(n_laws, seed=7, max_atoms=8, max_var=4.0):
    """Mean-zero finite-support laws with 2..max_atoms atoms and variance <= max_var."""
    rng = np.random.default_rng(seed)
    laws = []
    while len(laws) < n_laws:
        n = int(rng.integers(2, max_atoms + 1))
        v = np.sort(rng.standard_normal(n))
        if np.min(np.diff(v)) < 1e-6:
            continue
        p = rng.dirichlet(np.ones(n))
        v = v - float(np.dot(p, v))
        var = float(np.dot(p, v * v))
        v = v * math.sqrt(rng.uniform(0.05, max_var) / var)
        laws.append(dist.FiniteSupport(tuple(zip(v.tolist(), p.tolist()))))
    return laws


def _timed(number, name, fn, budget=None):
    """Run one check; ``budget`` (seconds) is a hard runtime limit where one is stated."""
    t0 = time.perf_counter()
    passed, detail = fn()
    elapsed = time.perf_counter() - t0
    if budget is not None and elapsed >= budget:
        passed = False
        detail += f"; exceeded the {budget:g} s budget"
    return CriterionResult(number, name, bool(passed), detail, elapsed)


# 1 ------------------------------------------------------------------------------

def _exact_formulas():
    worst = 0.0
    t0 = time.perf_counter()
    # first exit: 100-point (a, b, x) grid
    for a in (0.25, 0.5, 1.0, 2.0, 3.5):
        for b in (0.3, 1.0, 2.5, 4.0):
            for x in np.linspace(-a, b, 5):
                got = exact_expected_local_time(dist.FirstExit(a, b), float(x))
                worst = max(worst, abs(got - bounds.closed_form_first_exit(a, b, float(x))))
    for a, b in ((1.0, 1.0), (1.0, 4.0), (0.5, 2.0), (3.0, 0.7)):
        got = exact_expected_local_time(dist.FirstExit(a, b), 0.0)
        worst = max(worst, abs(got - 2.0 * a * b / (a + b)))
    for s in (0.5, 1.0, 2.0, 3.7):
        worst = max(worst, abs(exact_expected_local_time(dist.Normal(s), 0.0)
                               - s * math.sqrt(2.0 / math.pi)))
        worst = max(worst, abs(exact_expected_local_time(dist.ShiftedExponential(s), 0.0)
                               - 2.0 * s / math.e))
    # dichotomous optimum: 50-point (x, sigma) grid
    for x in np.linspace(0.0, 3.0, 10):
        for s in (0.5, 0.8, 1.0, 1.7, 2.5):
            x, s = float(x), float(s)
            got = exact_expected_local_time(dist.TwoPointOptimal(x, s), x)
            worst = max(worst, abs(got - (math.sqrt(s * s + x * x) - x)))
    elapsed = time.perf_counter() - t0
    return worst <= EXACT_TOL and elapsed < 1.0, f"max abs error {worst:.2e}, {elapsed:.3f} s"


# 2 ------------------------------------------------------------------------------

def _attainment(n_paths, workers):
    parts, ok = [], True
    for x in (0.75, 0.0):
        spec = ExperimentSpec(stopping.optimal_rule(x, 1.0), (x,), n_paths, DT, EPS,
                              (OCCUPATION,), SEED)
        row = run_experiment(spec, workers=workers).rows[0]
        err = abs(row.estimate - row.bound)
        tol = 3 * row.std_error + OCC_ALLOW
        ok &= err <= tol
        parts.append(f"x={x:g}: {row.estimate:.4f} vs bound {row.bound:.4f} (|err| {err:.4f} <= {tol:.4f})")
    return ok, "; ".join(parts)


# 3 ------------------------------------------------------------------------------

def _dominance():
    laws = random_laws(500)
    rng = np.random.default_rng(11)
    worst_excess, min_gap, worst_opt = -math.inf, math.inf, 0.0
    for law in laws:
        sigma = math.sqrt(law.variance())
        for x in rng.uniform(-3.0, 3.0, 20):
            x = float(x)
            bound = bounds.sharp_bound(x, sigma)
            gap = bound - exact_expected_local_time(law, x)
            worst_excess = max(worst_excess, -gap)
            min_gap = min(min_gap, gap)
            opt = exact_expected_local_time(dist.TwoPointOptimal(x, sigma), x)
            worst_opt = max(worst_opt, abs(opt - bound))
    ok = worst_excess <= EXACT_TOL and min_gap > 1e-9 and worst_opt <= EXACT_TOL
    return ok, (f"max excess {worst_excess:.2e}, min gap of random laws {min_gap:.2e}, "
                f"optimal law |gap| <= {worst_opt:.2e}")


# 4 ------------------------------------------------------------------------------

PAIRS = ((0.1, 2.0), (0.25, 1.0), (0.5, 0.5), (0.75, 1.0), (1.0, 1.0), (1.5, 3.0), (2.0, 1.0),
         (3.0, 2.0), (5.0, 1.0), (10.0, 4.0))


def _argmax(n_grid=1_000_000):
    worst_y, worst_v = 0.0, 0.0
    for x, s in PAIRS:
        lo = -s * s / x
        y = lo + (np.arange(n_grid) + 0.5) * (-lo / n_grid)
        vals = stopping.two_stage_objective(y, x, s)
        k = int(np.argmax(vals))
        worst_y = max(worst_y, abs(y[k] - stopping.optimal_first_level(x, s)))
        worst_v = max(worst_v, abs(vals[k] - (math.sqrt(s * s + x * x) - x)))
    return worst_y <= 1e-4 and worst_v <= 1e-9, f"max |argmax - (x - sqrt(sigma^2 + x^2))| {worst_y:.2e}, max value gap {worst_v:.2e}"


# 5 ------------------------------------------------------------------------------

def _expected_tau(n_paths, workers):
    rule = stopping.FirstExit.from_ab(1.0, 2.0)
    spec = ExperimentSpec(rule, (0.0,), n_paths, DT, EPS, (OCCUPATION,), SEED)
    s = run_experiment(spec, workers=workers)
    err = abs(s.tau_mean - 2.0)
    tol = 3 * s.tau_std_error + 2 * DT
    return err <= tol, f"E[tau] {s.tau_mean:.5f} vs 2 (|err| {err:.5f} <= {tol:.5f})"


# 6 ------------------------------------------------------------------------------

def _cross_validation(n_paths, workers):
    rule = stopping.FirstExit.from_ab(1.0, 1.0)
    spec = ExperimentSpec(rule, (0.0, 0.5), n_paths, DT, EPS, (OCCUPATION, UPCROSSING), SEED + 1)
    s = run_experiment(spec, workers=workers)
    ok, parts = True, []
    for x in (0.0, 0.5):
        occ = s.rows_for(x, OCCUPATION)[0]
        up = s.rows_for(x, UPCROSSING)[0]
        e_occ = abs(occ.estimate - occ.exact)
        e_up = abs(up.estimate - up.exact)
        mutual = abs(occ.estimate - up.estimate)
        t_mutual = 3 * math.hypot(occ.std_error, up.std_error) + 0.05
        ok &= (e_occ <= 3 * occ.std_error + OCC_ALLOW and e_up <= 3 * up.std_error + UP_ALLOW
               and mutual <= t_mutual)
        parts.append(f"x={x:g}: occ {occ.estimate:.4f}, up {up.estimate:.4f}, exact {occ.exact:g}")
    return ok, "; ".join(parts)


# 7 ------------------------------------------------------------------------------

THREE_POINT = dist.FiniteSupport(((-1, 0.25), (0, 0.5), (1, 0.25)))


def _embedding(n_paths, workers):
    worst = 0.0
    all_match = True
    t0 = time.perf_counter()
    for law in random_laws(200, seed=3):
        plan = embedding.chacon_walsh_plan(law)
        rep = embedding.verify_plan(plan)
        all_match &= rep.exact_match and len(plan) <= len(law.points) - 1
        worst = max(worst, rep.max_prob_gap, rep.potential_gap)
    exact_seconds = time.perf_counter() - t0
    all_match &= exact_seconds < 5.0
    plan = embedding.chacon_walsh_plan(THREE_POINT)
    spec = ExperimentSpec(plan.as_rule(), (0.0,), n_paths, DT, EPS, (OCCUPATION,), SEED + 2)
    s = run_experiment(spec, workers=workers)
    atoms = [float(v) for v in THREE_POINT.values]
    observed = np.array([s.terminal_counts.get(a, 0) for a in atoms], dtype=float)
    stray = sum(s.terminal_counts.values()) - observed.sum()
    expected = np.array([float(p) for p in THREE_POINT.probs]) * observed.sum()
    p_value = float(stats.chisquare(observed, expected).pvalue)
    row = s.rows[0]
    exact = float(exact_expected_local_time(THREE_POINT, 0.0))
    err = abs(row.estimate - exact)
    tol = 3 * row.std_error + OCC_ALLOW
    ok = all_match and worst <= 1e-10 and stray == 0 and p_value > 1e-3 and err <= tol
    return ok, (f"200 round trips max gap {worst:.1e} in {exact_seconds:.2f} s; chi-square p={p_value:.3f}; "
                f"L_0 {row.estimate:.4f} vs {exact:g} (|err| {err:.4f} <= {tol:.4f})")


# 8 ------------------------------------------------------------------------------

def _unimodality():
    laws = random_laws(500) + [dist.Normal(1.0), dist.ShiftedExponential(1.0),
                               dist.FirstExit(1.0, 3.0), dist.TwoPointOptimal(0.75, 1.0)]
    grid = np.linspace(0.0, 6.0, 61)
    ok = True
    for law in laws:
        right = [exact_expected_local_time(law, float(x)) for x in grid]
        left = [exact_expected_local_time(law, float(-x)) for x in grid]
        ok &= all(b <= a + EXACT_TOL for a, b in zip(right, right[1:]))
        ok &= all(b <= a + EXACT_TOL for a, b in zip(left, left[1:]))
    xs = np.linspace(0.0, 50.0, 501)
    sb = bounds.sharp_bound(xs, 1.0)
    ok_bound = bool(np.all(np.diff(sb) < 0)) and bool(np.all(bounds.sharp_bound(-xs, 1.0) == sb))
    asym = 1e4 * bounds.sharp_bound(1e4, 1.0)
    ok_asym = abs(asym - 0.5) <= 1e-4
    return ok and ok_bound and ok_asym, (f"{len(laws)} laws monotone on each side: {ok}; "
                                         f"bound strictly decreasing: {ok_bound}; x*bound at 1e4 = {asym:.8f}")


# 9 ------------------------------------------------------------------------------

def _determinism(n_paths):
    from .cli import main

    args = ["simulate", "--rule", "firstexit:a=1,b=1", "--xs=-0.5,0,0.5", "--paths",
            str(n_paths), "--dt", "1e-3", "--epsilon", "0.05", "--seed", "99"]
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for i in range(2):
            path = os.path.join(tmp, f"run{i}.csv")
            code = main(args + ["--out", path, "--quiet"])
            if code != 0:
                return False, f"simulate exited with {code}"
            with open(path, "rb") as fh:
                outs.append(fh.read())
    same = outs[0] == outs[1]
    return same, f"two runs byte-identical: {same} ({len(outs[0])} bytes)"


def run_all(quick=False, workers=1, only=None):
    """Run every criterion (or those numbered in ``only``) and return their results."""
    n = N_PATHS_QUICK if quick else N_PATHS
    checks = [
        (1, "exact-formula suite", _exact_formulas, None),  # 1 s limit checked inside
        (2, "attainment of the bound", lambda: _attainment(n, workers), None),
        (3, "sharpness and dominance", _dominance, 10.0),
        (4, "optimal lower endpoint", _argmax, 5.0),
        (5, "E[tau] identity", lambda: _expected_tau(n, workers), None),
        (6, "estimator cross-validation", lambda: _cross_validation(n, workers), None),
        (7, "embedding round trip", lambda: _embedding(n, workers), None),
        (8, "unimodality and monotonicity", _unimodality, 5.0),
        (9, "determinism", lambda: _determinism(2000), 60.0),
    ]
    return [_timed(num, name, fn, budget) for num, name, fn, budget in checks
            if only is None or num in only]
