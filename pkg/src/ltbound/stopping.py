"""Stopping rules for Brownian motion started at 0.

Rules are immutable value objects. Each one compiles to a :class:`RuleProgram`,
a flat list of exit intervals that the path engine walks through, and the
per-path state machine :class:`RuleState` interprets that program one grid
sample at a time.

The two-stage rule and the optimal interval implement the construction that
maximizes expected local time at a level ``x`` under a variance budget sigma^2:
exit ``(y, x)``; if ``x`` is reached first, exit ``(x - eta, x + eta)``.
"""

import math
import re
from dataclasses import dataclass

import numpy as np

from ._grammar import parse_keyvals, parse_number, split_kind
from .errors import InfeasibleY, ParseError, ValidationError

# stage modes in a compiled program
PLAIN = 0      # run only if the current position is strictly inside, else skip
IF_UPPER = 1   # run only if the previous stage exited through its upper end, else stop


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"interval needs lower < upper, got ({self.lower}, {self.upper})")

    def contains(self, p):
        return self.lower < p < self.upper

    def __iter__(self):
        yield self.lower
        yield self.upper


@dataclass(frozen=True)
class FirstExit:
    """Stop at the first exit from ``interval``, which must straddle the start 0."""

    interval: Interval

    def __post_init__(self):
        if not self.interval.lower < 0 < self.interval.upper:
            raise ValueError("first-exit interval must satisfy lower < 0 < upper")

    @classmethod
    def from_ab(cls, a, b):
        """First exit from ``(-a, b)``."""
        return cls(Interval(-a, b))


@dataclass(frozen=True)
class FirstHit:
    """Stop at the first visit to ``level``. Needs a time cap in practice."""

    level: float


@dataclass(frozen=True)
class TwoStage:
    """Exit ``(y, x)``; stop if at ``y``, otherwise exit ``(x - eta, x + eta)``."""

    x: float
    y: float
    eta: float

    def __post_init__(self):
        if not (self.y < 0 < self.x and self.eta > 0):
            raise ValueError("two-stage rule needs y < 0 < x and eta > 0")


@dataclass(frozen=True)
class PlanSequence:
    """Iterated first exits; a step is skipped when the position is not strictly inside it."""

    steps: tuple

    def __post_init__(self):
        steps = tuple(s if isinstance(s, Interval) else Interval(*s) for s in self.steps)
        object.__setattr__(self, "steps", steps)


@dataclass(frozen=True)
class TimeCap:
    inner: object
    cap: float

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError("cap must be > 0")


@dataclass(frozen=True)
class RuleProgram:
    lower: np.ndarray
    upper: np.ndarray
    mode: np.ndarray
    cap: float | None = None


def compile_rule(rule):
    """Flatten a rule into parallel arrays of stage bounds and modes."""
    cap = None
    while isinstance(rule, TimeCap):
        cap = rule.cap if cap is None else min(cap, rule.cap)
        rule = rule.inner
    if isinstance(rule, FirstExit):
        stages = [(rule.interval.lower, rule.interval.upper, PLAIN)]
    elif isinstance(rule, FirstHit):
        if rule.level > 0:
            stages = [(-math.inf, rule.level, PLAIN)]
        elif rule.level < 0:
            stages = [(rule.level, math.inf, PLAIN)]
        else:
            stages = []
    elif isinstance(rule, TwoStage):
        stages = [(rule.y, rule.x, PLAIN), (rule.x - rule.eta, rule.x + rule.eta, IF_UPPER)]
    elif isinstance(rule, PlanSequence):
        stages = [(s.lower, s.upper, PLAIN) for s in rule.steps]
    else:
        raise TypeError(f"not a stopping rule: {rule!r}")
    return RuleProgram(
        lower=np.array([float(s[0]) for s in stages], dtype=np.float64),
        upper=np.array([float(s[1]) for s in stages], dtype=np.float64),
        mode=np.array([s[2] for s in stages], dtype=np.int64),
        cap=cap,
    )


def unwrap(rule):
    while isinstance(rule, TimeCap):
        rule = rule.inner
    return rule


# --- optimal construction -----------------------------------------------------

def optimal_interval(x, sigma):
    """Exit interval ``(x - s, x + s)``, ``s = sqrt(sigma^2 + x^2)``, that maximizes E[L_x]."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    s = math.hypot(sigma, x)
    return Interval(x - s, x + s)


def optimal_rule(x, sigma):
    return FirstExit(optimal_interval(x, sigma))


def optimal_first_level(x, sigma):
    """Maximizer ``x - sqrt(sigma^2 + x^2)`` of the two-stage objective."""
    return x - math.hypot(sigma, x)


def two_stage_objective(y, x, sigma):
    """Expected local time at ``x`` of the best two-stage rule with first level ``y``.

    Equals ``eta * P(A) = sqrt(-(sigma^2 + x y) y / (x - y))`` where ``A`` is the event
    that ``x`` is reached before ``y``. Accepts an array of ``y``.
    """
    if not (sigma > 0 and x > 0):
        raise ValueError("need sigma > 0 and x > 0")
    ya = np.asarray(y, dtype=float)
    if np.any(ya >= 0):
        raise ValueError("y must be < 0")
    budget = sigma * sigma + x * ya
    if np.any(budget <= 0):
        raise InfeasibleY(f"sigma^2 + x*y must be > 0 (y >= {-sigma * sigma / x!r} required)")
    val = np.sqrt(-budget * ya / (x - ya))
    return float(val) if val.ndim == 0 else val


def two_stage_eta(y, x, sigma):
    """Second-stage half-width ``eta = sqrt((sigma^2 + x y)(x - y) / -y)``."""
    budget = sigma * sigma + x * y
    if budget <= 0:
        raise InfeasibleY("sigma^2 + x*y must be > 0")
    return math.sqrt(budget * (x - y) / -y)


def two_stage_rule(y, x, sigma):
    """Two-stage rule for first level ``y`` spending the full variance budget."""
    return TwoStage(x, y, two_stage_eta(y, x, sigma))


# --- per-path state machine ------------------------------------------------------

@dataclass(frozen=True)
class Decision:
    """Outcome of one grid step.

    ``action`` is ``"continue"``, ``"stop_at"`` or ``"stop_now"``. A ``continue``
    with a ``level`` means a stage boundary was reached: the path is clamped to
    ``level`` and the next stage starts there.
    """

    action: str
    level: float | None = None


CONTINUE = Decision("continue")
STOP_NOW = Decision("stop_now")


class RuleState:
    """Mutable progress of one path through a compiled rule."""

    def __init__(self, rule, position=0.0):
        self.program = rule if isinstance(rule, RuleProgram) else compile_rule(rule)
        self.stage = 0
        self.position = float(position)
        self.stopped = False
        self._advance(came_from_upper=True)

    def _advance(self, came_from_upper):
        prog = self.program
        n = len(prog.lower)
        while self.stage < n:
            if prog.mode[self.stage] == IF_UPPER and not came_from_upper:
                self.stage = n
                break
            if prog.lower[self.stage] < self.position < prog.upper[self.stage]:
                break
            self.stage += 1
        if self.stage >= n:
            self.stopped = True

    @property
    def interval(self):
        if self.stopped:
            return None
        return self.program.lower[self.stage], self.program.upper[self.stage]

    def step(self, value, elapsed, crossed=None):
        """Feed the next grid sample; ``crossed`` names a boundary crossed between samples."""
        if self.stopped:
            return Decision("stop_at", self.position)
        lo, hi = self.interval
        if value >= hi or crossed == hi:
            level, upper = hi, True
        elif value <= lo or crossed == lo:
            level, upper = lo, False
        else:
            cap = self.program.cap
            if cap is not None and elapsed >= cap:
                self.stopped = True
                self.position = float(value)
                return STOP_NOW
            self.position = float(value)
            return CONTINUE
        self.position = float(level)
        self.stage += 1
        self._advance(came_from_upper=upper)
        if self.stopped:
            return Decision("stop_at", float(level))
        return Decision("continue", float(level))


def apply_rule(rule, state, value, elapsed, crossed=None):
    """Advance ``state`` (a :class:`RuleState` for ``rule``) by one sample."""
    if state is None:
        state = RuleState(rule)
    return state.step(value, elapsed, crossed)


# --- text grammar -------------------------------------------------------------

_CAP_RE = re.compile(r",\s*cap\s*=\s*([^,;]+)\s*$", re.IGNORECASE)


def parse_intervals(body):
    steps = []
    for chunk in filter(None, (c.strip() for c in body.split(";"))):
        chunk = chunk.strip("()")
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 2:
            raise ParseError(f"interval must be 'lower,upper', got {chunk!r}")
        lo, hi = (parse_number(p, "interval endpoint") for p in parts)
        try:
            steps.append(Interval(lo, hi))
        except ValueError as exc:
            raise ValidationError("interval", str(exc)) from None
    return tuple(steps)


def parse_rule(text):
    """Parse the rule grammar, e.g. ``firstexit:a=1,b=2`` or ``plan:-1,0.5;0,1,cap=20``."""
    text = text.strip()
    cap = None
    m = _CAP_RE.search(text)
    if m:
        cap = parse_number(m.group(1).strip(), "cap")
        text = text[: m.start()]
    kind, body = split_kind(text)
    try:
        if kind == "firstexit":
            kv = parse_keyvals(body, ("a", "b"))
            rule = FirstExit.from_ab(kv["a"], kv["b"])
        elif kind == "optimal":
            kv = parse_keyvals(body, ("x", "sigma"))
            rule = optimal_rule(kv["x"], kv["sigma"])
        elif kind == "twostage":
            kv = parse_keyvals(body, ("x", "y", "eta"))
            rule = TwoStage(kv["x"], kv["y"], kv["eta"])
        elif kind == "firsthit":
            rule = FirstHit(parse_keyvals(body, ("level",))["level"])
        elif kind == "plan":
            rule = PlanSequence(parse_intervals(body))
        else:
            raise ParseError(f"unknown rule kind {kind!r}")
        if cap is not None:
            rule = TimeCap(rule, cap)
    except ParseError:
        raise
    except ValueError as exc:
        raise ValidationError("rule", str(exc)) from None
    return rule


def format_intervals(steps, digits=None):
    fmt = (lambda v: f"{float(v):.{digits}g}") if digits else (lambda v: repr(float(v)))
    return ";".join(f"{fmt(s.lower)},{fmt(s.upper)}" for s in steps)


def format_rule(rule):
    cap = None
    if isinstance(rule, TimeCap):
        cap, rule = rule.cap, rule.inner
    if isinstance(rule, FirstExit):
        text = f"firstexit:a={-float(rule.interval.lower)!r},b={float(rule.interval.upper)!r}"
    elif isinstance(rule, FirstHit):
        text = f"firsthit:level={float(rule.level)!r}"
    elif isinstance(rule, TwoStage):
        text = f"twostage:x={float(rule.x)!r},y={float(rule.y)!r},eta={float(rule.eta)!r}"
    elif isinstance(rule, PlanSequence):
        text = "plan:" + format_intervals(rule.steps)
    else:
        raise TypeError(type(rule).__name__)
    return text if cap is None else f"{text},cap={float(cap)!r}"
