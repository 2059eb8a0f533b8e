"""Brownian paths on a uniform grid, stopped by a compiled rule.

Each step adds one ``N(0, dt)`` increment. A boundary crossing is detected in
two ways: the new sample lies on or beyond a boundary, or the Brownian bridge
between two inside samples crossed it (probability
``exp(-2 d0 d1 / dt)`` for distances ``d0, d1`` to that boundary). In both cases
the stopped value is clamped to the boundary level. The bridge test costs one
uniform draw, taken only when a boundary is within a few grid scales.

The numba kernel is the production path; :func:`simulate_path_reference`
replays the same draws through :class:`~ltbound.stopping.RuleState` in pure
Python and exists to cross-check the kernel.
"""

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np

from .errors import CapReached
from .stopping import RuleState, compile_rule
from .streams import RandomStream, as_generator, make_generator

__all__ = [
    "PathGrid",
    "RandomStream",
    "make_generator",
    "simulate_path",
    "simulate_path_reference",
    "sample_terminal_exact",
    "cap_steps",
]

# bridge crossing probabilities below exp(-2 * BRIDGE_CUTOFF) are treated as zero
BRIDGE_CUTOFF = 20.0
_EMPTY = np.empty(0, dtype=np.float64)


@dataclass(frozen=True)
class PathGrid:
    """One stopped path: ``values[k]`` is the position at time ``k * dt``.

    ``values`` ends at the stopping index. ``capped`` is True when the time cap,
    not the rule, ended the path.
    """

    dt: float
    values: np.ndarray
    stopped_index: int
    capped: bool = False

    @property
    def tau(self):
        return self.stopped_index * self.dt

    @property
    def terminal(self):
        return float(self.values[self.stopped_index])

    @property
    def times(self):
        return np.arange(self.stopped_index + 1) * self.dt


def cap_steps(cap, dt):
    """Number of grid steps allowed by a process-time cap."""
    return max(1, int(math.ceil(cap / dt - 1e-9)))


@numba.njit(cache=True)
def _walk(gen, lower, upper, mode, dt, n_cap, occ_levels, eps, up_lo, up_hi, record):
    sq = math.sqrt(dt)
    cutoff = BRIDGE_CUTOFF * dt
    n_stages = lower.size
    n_occ = occ_levels.size
    n_up = up_lo.size
    occ = np.zeros(n_occ, dtype=np.int64)
    ups = np.zeros(n_up, dtype=np.int64)
    armed = np.zeros(n_up, dtype=np.bool_)
    buf = np.empty(1024 if record else 1, dtype=np.float64)

    pos = 0.0
    k = 0
    # tally sample 0
    for i in range(n_occ):
        if abs(pos - occ_levels[i]) < eps:
            occ[i] += 1
    for j in range(n_up):
        if pos <= up_lo[j]:
            armed[j] = True
        elif pos >= up_hi[j] and armed[j]:
            ups[j] += 1
            armed[j] = False
    if record:
        buf[0] = pos

    # enter the first active stage
    stage = 0
    from_upper = True
    while stage < n_stages:
        if mode[stage] == 1 and not from_upper:
            stage = n_stages
            break
        if lower[stage] < pos < upper[stage]:
            break
        stage += 1

    capped = False
    while stage < n_stages:
        lo = lower[stage]
        hi = upper[stage]
        k += 1
        v = pos + sq * gen.standard_normal()
        level = 0.0
        hit = 0
        if v >= hi:
            hit = 2
            level = hi
        elif v <= lo:
            hit = 1
            level = lo
        else:
            d_hi = (hi - pos) * (hi - v)
            d_lo = (pos - lo) * (v - lo)
            if d_hi < cutoff or d_lo < cutoff:
                p_hi = math.exp(-2.0 * d_hi / dt) if d_hi < cutoff else 0.0
                p_lo = math.exp(-2.0 * d_lo / dt) if d_lo < cutoff else 0.0
                u = gen.random()
                if u < p_hi:
                    hit = 2
                    level = hi
                elif u < p_hi + p_lo:
                    hit = 1
                    level = lo
        if hit:
            v = level
        if record:
            if k >= buf.size:
                grown = np.empty(2 * buf.size, dtype=np.float64)
                grown[: buf.size] = buf
                buf = grown
            buf[k] = v
        for i in range(n_occ):
            if abs(v - occ_levels[i]) < eps:
                occ[i] += 1
        for j in range(n_up):
            if v <= up_lo[j]:
                armed[j] = True
            elif v >= up_hi[j] and armed[j]:
                ups[j] += 1
                armed[j] = False
        pos = v
        if hit:
            from_upper = hit == 2
            stage += 1
            while stage < n_stages:
                if mode[stage] == 1 and not from_upper:
                    stage = n_stages
                    break
                if lower[stage] < pos < upper[stage]:
                    break
                stage += 1
        elif k >= n_cap:
            capped = True
            break

    if record:
        buf = buf[: k + 1].copy()
    return k, pos, capped, occ, ups, buf


def run_kernel(program, dt, n_cap, gen, occ_levels=_EMPTY, eps=1.0, up_lo=_EMPTY, up_hi=_EMPTY,
               record=False):
    return _walk(gen, program.lower, program.upper, program.mode, float(dt), int(n_cap),
                 occ_levels, float(eps), up_lo, up_hi, record)


def _resolve_cap(program, cap, dt):
    if program.cap is not None:
        cap = program.cap if cap is None else min(cap, program.cap)
    if cap is None:
        raise ValueError("a time cap is required")
    if cap < dt:
        raise ValueError("cap must be >= dt")
    return cap_steps(cap, dt)


def simulate_path(rule, dt, cap, rng):
    """Simulate one path of ``rule`` on a grid of step ``dt`` until it stops or ``cap``.

    A capped path is still returned, with ``capped=True`` and a :class:`CapReached`
    warning.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    program = compile_rule(rule)
    n_cap = _resolve_cap(program, cap, dt)
    k, _, capped, _, _, values = run_kernel(program, dt, n_cap, as_generator(rng), record=True)
    values.setflags(write=False)
    if capped:
        warnings.warn(f"path capped after {k} steps ({k * dt:g} time units)", CapReached,
                      stacklevel=2)
    return PathGrid(float(dt), values, int(k), bool(capped))


def simulate_path_reference(rule, dt, cap, rng):
    """Pure-Python twin of :func:`simulate_path`; identical draws, identical path."""
    program = compile_rule(rule)
    n_cap = _resolve_cap(program, cap, dt)
    gen = as_generator(rng)
    state = RuleState(dataclasses.replace(program, cap=n_cap * dt))
    sq = math.sqrt(dt)
    cutoff = BRIDGE_CUTOFF * dt
    values = [0.0]
    capped = False
    k = 0
    while not state.stopped:
        lo, hi = state.interval
        pos = state.position
        k += 1
        v = pos + sq * float(gen.standard_normal())
        crossed = None
        if lo < v < hi:
            d_hi = (hi - pos) * (hi - v)
            d_lo = (pos - lo) * (v - lo)
            if d_hi < cutoff or d_lo < cutoff:
                p_hi = math.exp(-2.0 * d_hi / dt) if d_hi < cutoff else 0.0
                p_lo = math.exp(-2.0 * d_lo / dt) if d_lo < cutoff else 0.0
                u = float(gen.random())
                if u < p_hi:
                    crossed = hi
                elif u < p_hi + p_lo:
                    crossed = lo
        decision = state.step(v, k * dt, crossed)
        if decision.action == "stop_now":
            capped = True
            values.append(v)
            break
        values.append(decision.level if decision.level is not None else v)
    return PathGrid(float(dt), np.array(values), k, capped)


def sample_terminal_exact(plan, rng, size=None):
    """Draw the terminal position of an interval sequence without simulating a path.

    From position ``p`` strictly inside ``(a, b)`` the upper end is reached first
    with probability ``(p - a) / (b - a)``; positions outside a step are left alone.
    """
    steps = getattr(plan, "steps", plan)
    gen = as_generator(rng)
    if size is None:
        pos = 0.0
        for lo, hi in steps:
            lo, hi = float(lo), float(hi)
            if lo < pos < hi:
                pos = hi if gen.random() < (pos - lo) / (hi - lo) else lo
        return pos
    pos = np.zeros(size)
    for lo, hi in steps:
        lo, hi = float(lo), float(hi)
        u = gen.random(size)
        inside = (lo < pos) & (pos < hi)
        up = u < (pos - lo) / (hi - lo)
        pos = np.where(inside, np.where(up, hi, lo), pos)
    return pos
