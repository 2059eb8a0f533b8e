"""Chacon-Walsh embedding of finite-support mean-zero laws.

Start from the point mass at 0, whose potential is ``|x|``. Each linear piece of
the target potential ``h(x) = E|X - x|`` is a supporting line of ``h``. Taking
these lines in increasing slope order, the part of a line lying strictly above
the current minorant is an interval ``(a, b)``; running the path to its first exit
from ``(a, b)`` replaces the minorant there by the line. After every piece has
been used the minorant equals ``h`` and the path has the target law.

Probabilities are propagated in exact rational arithmetic when the target has
rational probabilities with denominators up to 10^6 and an exactly zero mean;
otherwise in floating point, with interval endpoints snapped onto the atoms they
approximate.
"""

import math
import numbers
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from .distributions import (
    MEAN_TOL,
    FiniteSupport,
    as_finite,
    is_dilation,
    point_mass,
    potential,
)
from .errors import NonZeroMean
from .stopping import (
    FirstExit,
    FirstHit,
    Interval,
    PlanSequence,
    TwoStage,
    format_intervals,
    parse_intervals,
    unwrap,
)

MAX_DENOMINATOR = 10**6
LAW_TOL = 1e-10


@dataclass(frozen=True)
class EmbeddingPlan:
    steps: tuple
    target: FiniteSupport

    def as_rule(self):
        return PlanSequence(self.steps)

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True)
class PlanReport:
    exact_match: bool
    max_prob_gap: float
    potential_gap: float
    monotone: bool


def _to_rational(v):
    if isinstance(v, numbers.Rational):
        return Fraction(v)
    q = Fraction(v).limit_denominator(MAX_DENOMINATOR)
    return q if abs(float(q) - v) <= 1e-15 * max(1.0, abs(v)) else None


def _exact_target(f):
    """Rational copy of ``f`` if it is exactly representable with mean 0, else None."""
    probs = [_to_rational(p) for p in f.probs]
    if any(p is None for p in probs) or sum(probs) != 1:
        return None
    values = [_to_rational(v) for v in f.values]
    values = [Fraction(v) if q is None else q for v, q in zip(f.values, values)]
    if sum(p * v for v, p in zip(values, probs)) != 0:
        return None
    return FiniteSupport(tuple(zip(values, probs)))


def _snap(u, known):
    for k in known:
        if abs(u - k) <= 1e-9 * (1.0 + abs(k)):
            return k
    return u


def chacon_walsh_plan(target):
    """Interval sequence whose iterated first exits embed ``target`` (at most n - 1 steps)."""
    f = as_finite(target)
    exact = _exact_target(f)
    if exact is None:
        f = f.to_float()
        mean = f.mean()
        if abs(mean) > MEAN_TOL:
            raise NonZeroMean(mean)
    else:
        f = exact
    pot = potential(f)
    values, probs = f.values, f.probs
    lines = [(-1, 0), (1, 0)]
    known = [0.0] + [float(v) for v in values]
    steps = []
    cum = 0
    for j in range(len(values) - 1):
        cum += probs[j]
        slope = 2 * cum - 1
        icpt = pot.values[j] - slope * values[j]
        lo_bounds, hi_bounds, empty = [], [], False
        for m, d in lines:
            if m < slope:
                lo_bounds.append((d - icpt) / (slope - m))
            elif m > slope:
                hi_bounds.append((d - icpt) / (slope - m))
            elif d >= icpt:
                empty = True
        lo, hi = max(lo_bounds), min(hi_bounds)
        if exact is None:
            lo, hi = _snap(lo, known), _snap(hi, known)
            if empty or not hi - lo > 1e-12 * (1.0 + abs(lo) + abs(hi)):
                continue
            known.extend((lo, hi))
        elif empty or not lo < hi:
            continue
        steps.append(Interval(lo, hi))
        lines.append((slope, icpt))
    return EmbeddingPlan(tuple(steps), as_finite(target))


def _step(mass, lo, hi):
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("plan intervals must be bounded")
    out = defaultdict(int)
    for pos, w in mass.items():
        if lo < pos < hi:
            width = hi - lo
            out[hi] += w * (pos - lo) / width
            out[lo] += w * (hi - pos) / width
        else:
            out[pos] += w
    return out


def plan_laws(steps):
    """Laws of the position after 0, 1, ..., len(steps) steps."""
    steps = getattr(steps, "steps", steps)
    mass = {0: 1}
    laws = [point_mass(0)]
    for s in steps:
        mass = _step(mass, s.lower, s.upper)
        laws.append(FiniteSupport(tuple(mass.items())))
    return laws


def terminal_law_of_plan(steps):
    """Exact law of the final position, starting from the point mass at 0."""
    return plan_laws(steps)[-1]


def terminal_law_of_rule(rule):
    """Closed-form terminal law of a rule, or None when there is none (first hit)."""
    rule = unwrap(rule)
    if isinstance(rule, FirstExit):
        lo, hi = rule.interval.lower, rule.interval.upper
        if isinstance(lo, numbers.Rational) and isinstance(hi, numbers.Rational):
            lo, hi = Fraction(lo), Fraction(hi)
        return FiniteSupport(((lo, hi / (hi - lo)), (hi, -lo / (hi - lo))))
    if isinstance(rule, TwoStage):
        x, y, eta = rule.x, rule.y, rule.eta
        p_x = -y / (x - y)
        mass = defaultdict(float)
        mass[y] += x / (x - y)
        mass[x - eta] += p_x / 2
        mass[x + eta] += p_x / 2
        return FiniteSupport(tuple(mass.items()))
    if isinstance(rule, PlanSequence):
        return terminal_law_of_plan(rule.steps)
    if isinstance(rule, FirstHit):
        return None
    raise TypeError(f"not a stopping rule: {rule!r}")


def _align(law, target, tol):
    """Move each atom of ``law`` onto a target atom within ``tol`` (float noise)."""
    if law.exact and target.exact:
        return law
    tv = [float(v) for v in target.values]
    mass = defaultdict(float)
    for v, p in law.points:
        v = float(v)
        near = min(tv, key=lambda t: abs(t - v))
        mass[near if abs(near - v) <= tol * (1.0 + abs(near)) else v] += float(p)
    return FiniteSupport(tuple(mass.items()))


def _gaps(law, target, tol=LAW_TOL):
    law = _align(law, target, tol)
    grid = sorted(set(law.values) | set(target.values))
    prob_gap = max(abs(law.cdf(u) - target.cdf(u)) for u in grid)
    pl, pt = potential(law), potential(target)
    pot_gap = max(abs(pl(u) - pt(u)) for u in grid)
    return prob_gap, pot_gap


def verify_plan(plan, tol=LAW_TOL):
    """Check the plan's terminal law against its target and the dilation chain.

    ``max_prob_gap`` is the largest CDF difference (Kolmogorov distance) and
    ``potential_gap`` the largest potential difference, both over the union of
    atoms.
    """
    laws = plan_laws(plan.steps)
    law, target = laws[-1], as_finite(plan.target)
    prob_gap, pot_gap = _gaps(law, target, tol)
    if law.exact and target.exact:
        exact_match = law.points == target.points
    else:
        exact_match = prob_gap <= tol and pot_gap <= tol
    monotone = all(is_dilation(a, b, tol=tol) for a, b in zip(laws, laws[1:]))
    return PlanReport(bool(exact_match), float(prob_gap), float(pot_gap), bool(monotone))


def format_plan(plan, digits=None):
    """``(lo,hi);(lo,hi)`` for display; ``digits`` rounds to significant digits."""
    steps = getattr(plan, "steps", plan)
    fmt = (lambda v: f"{float(v):.{digits}g}") if digits else (lambda v: repr(float(v)))
    return ";".join(f"({fmt(s.lower)},{fmt(s.upper)})" for s in steps)


def serialize_plan(plan):
    """``plan:lo,hi;lo,hi`` in full precision; the rule grammar reads it back."""
    return "plan:" + format_intervals(getattr(plan, "steps", plan))


def parse_plan(text):
    text = text.strip()
    if text.lower().startswith("plan:"):
        text = text[5:]
    return parse_intervals(text)
