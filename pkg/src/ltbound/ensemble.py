"""Many-path Monte Carlo with deterministic, mergeable accumulators.

Path ``i`` always draws from stream ``(seed, i)``. Paths are grouped into blocks
of fixed size ``BLOCK``; blocks may run in worker processes but are merged in
block order, so the result never depends on the worker count.
"""

import math
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .brownian import cap_steps, run_kernel
from .errors import AllPathsCapped, CapReached
from .localtime import upcrossing_scale, upcrossing_window
from .stopping import compile_rule
from .streams import make_generator

BLOCK = 500
DEFAULT_CAP_FACTOR = 64.0


@dataclass(frozen=True)
class Accumulator:
    """Streaming (count, mean, M2) summary; merge is Chan's parallel update."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @classmethod
    def from_values(cls, values):
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            return cls()
        mean = float(arr.mean())
        return cls(int(arr.size), mean, float(np.sum((arr - mean) ** 2)))

    def merge(self, other):
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Accumulator(n, mean, m2)

    def scaled(self, c):
        return Accumulator(self.count, self.mean * c, self.m2 * c * c)

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def std_error(self):
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan


def merge_all(accs):
    out = Accumulator()
    for a in accs:
        out = out.merge(a)
    return out


@dataclass
class EnsembleResult:
    """Per-level estimates (in local-time units) plus stopping-time and terminal summaries."""

    xs: tuple
    dt: float
    epsilon: float
    n_paths: int
    n_capped: int = 0
    occupation: list = field(default_factory=list)
    upcrossing: list = field(default_factory=list)
    window_counts: list = field(default_factory=list)
    tau: Accumulator = field(default_factory=Accumulator)
    terminal: Accumulator = field(default_factory=Accumulator)
    terminal_sq: Accumulator = field(default_factory=Accumulator)
    terminal_counts: Counter = field(default_factory=Counter)

    @property
    def capped_fraction(self):
        return self.n_capped / self.n_paths

    def merge(self, other):
        self.n_capped += other.n_capped
        self.occupation = [a.merge(b) for a, b in zip(self.occupation, other.occupation)]
        self.upcrossing = [a.merge(b) for a, b in zip(self.upcrossing, other.upcrossing)]
        self.window_counts = [a.merge(b) for a, b in zip(self.window_counts, other.window_counts)]
        self.tau = self.tau.merge(other.tau)
        self.terminal = self.terminal.merge(other.terminal)
        self.terminal_sq = self.terminal_sq.merge(other.terminal_sq)
        self.terminal_counts.update(other.terminal_counts)
        return self


@dataclass(frozen=True)
class _BlockTask:
    rule: object
    start: int
    stop: int
    dt: float
    n_cap: int
    seed: int
    xs: np.ndarray
    epsilon: float
    up_lo: np.ndarray
    up_hi: np.ndarray
    n_windows: int
    occ_scale: float
    up_scale: float


def _run_block(task):
    program = compile_rule(task.rule)
    n = task.stop - task.start
    nx = task.xs.size
    occ = np.zeros((n, nx))
    ups = np.zeros((n, task.up_lo.size))
    taus = np.zeros(n)
    term = np.zeros(n)
    capped = np.zeros(n, dtype=bool)
    for i in range(n):
        gen = make_generator(task.seed, task.start + i)
        k, pos, cap_hit, occ_i, ups_i, _ = run_kernel(
            program, task.dt, task.n_cap, gen, task.xs, task.epsilon, task.up_lo, task.up_hi)
        occ[i] = occ_i
        ups[i] = ups_i
        taus[i] = k * task.dt
        term[i] = pos
        capped[i] = cap_hit
    ok = ~capped
    n_win = task.n_windows
    res = EnsembleResult(xs=tuple(task.xs), dt=task.dt, epsilon=task.epsilon, n_paths=n,
                         n_capped=int(capped.sum()))
    res.occupation = [Accumulator.from_values(occ[ok, j] * task.occ_scale) for j in range(nx)]
    res.upcrossing = [Accumulator.from_values(ups[ok, j] * task.up_scale) for j in range(nx)]
    res.window_counts = [Accumulator.from_values(ups[ok, nx + j]) for j in range(n_win)]
    res.tau = Accumulator.from_values(taus[ok])
    res.terminal = Accumulator.from_values(term[ok])
    res.terminal_sq = Accumulator.from_values(term[ok] ** 2)
    res.terminal_counts = Counter(term[ok].tolist())
    return res


def default_cap(rule):
    """64 sigma^2 of process time, sigma^2 the variance of the rule's terminal law."""
    from .embedding import terminal_law_of_rule

    law = terminal_law_of_rule(rule)
    if law is None:
        raise ValueError("rule has no closed-form terminal law; pass an explicit cap")
    return DEFAULT_CAP_FACTOR * max(float(law.variance()), 1e-12)


def simulate_ensemble(rule, xs, n_paths, dt, epsilon, seed=0, cap=None, workers=1,
                      windows=(), grid_correction=True):
    """Run ``n_paths`` paths of ``rule`` and summarize local-time estimates at each x.

    ``windows`` adds raw upcrossing counts for arbitrary ``(lower, upper)`` pairs.
    Capped paths are excluded from every summary and counted in ``n_capped``.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    if not (dt > 0 and epsilon > 0):
        raise ValueError("dt and epsilon must be > 0")
    program = compile_rule(rule)
    if cap is None:
        cap = program.cap if program.cap is not None else default_cap(rule)
    elif program.cap is not None:
        cap = min(cap, program.cap)
    if cap < dt:
        raise ValueError("cap must be >= dt")
    xs = np.asarray(xs, dtype=float).reshape(-1)
    wins = [upcrossing_window(float(x), epsilon) for x in xs] + [tuple(w) for w in windows]
    up_lo = np.array([w[0] for w in wins], dtype=float)
    up_hi = np.array([w[1] for w in wins], dtype=float)
    base = dict(rule=rule, dt=float(dt), n_cap=cap_steps(cap, dt), seed=int(seed), xs=xs,
                epsilon=float(epsilon), up_lo=up_lo, up_hi=up_hi, n_windows=len(windows),
                occ_scale=dt / (2.0 * epsilon),
                up_scale=upcrossing_scale(epsilon, dt if grid_correction else None))
    tasks = [_BlockTask(start=s, stop=min(s + BLOCK, n_paths), **base)
             for s in range(0, n_paths, BLOCK)]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_block, tasks))
    else:
        parts = [_run_block(t) for t in tasks]

    out = EnsembleResult(xs=tuple(xs.tolist()), dt=float(dt), epsilon=float(epsilon),
                         n_paths=int(n_paths))
    out.occupation = [Accumulator() for _ in xs]
    out.upcrossing = [Accumulator() for _ in xs]
    out.window_counts = [Accumulator() for _ in windows]
    for part in parts:
        out.merge(part)
    if out.n_capped == n_paths:
        raise AllPathsCapped(f"all {n_paths} paths reached the cap {cap:g}")
    if out.n_capped:
        warnings.warn(f"{out.n_capped} of {n_paths} paths capped at {cap:g}; excluded",
                      CapReached, stacklevel=2)
    return out
