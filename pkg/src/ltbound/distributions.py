"""Terminal laws of stopped Brownian motion.

A terminal law is the distribution of ``X = B(tau)``. Finite-support laws carry
their atoms explicitly (exact rational arithmetic is kept when every value and
probability is a :class:`fractions.Fraction` or int); the named families
``TwoPointOptimal``, ``FirstExit``, ``Normal`` and ``ShiftedExponential`` have
closed-form moments and partial expectations.

The potential of a law is ``x -> E|X - x|``. For a finite-support law it is
convex and piecewise linear with breakpoints at the atoms, and it orders laws in
the convex (martingale dilation) order.
"""

import bisect
import math
import numbers
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from ._grammar import parse_keyvals, parse_number, split_kind
from .errors import MeanMismatch, NonFiniteSupport, ParseError, ValidationError
from .streams import as_generator

PROB_TOL = 1e-12
MEAN_TOL = 1e-12

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_pdf(z):
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def norm_sf(z):
    """Standard normal survival function, accurate in the far tail."""
    return 0.5 * math.erfc(z / _SQRT2)


def _is_exact(v):
    return isinstance(v, numbers.Rational)


@dataclass(frozen=True)
class FiniteSupport:
    """Law with finitely many atoms.

    ``points`` accepts any iterable of ``(value, prob)`` pairs (or a mapping
    value -> prob). Atoms are sorted by value; probabilities must be strictly
    positive and sum to one within 1e-12, after which they are renormalized.
    """

    points: tuple

    def __post_init__(self):
        raw = self.points.items() if hasattr(self.points, "items") else self.points
        pairs = [(v, p) for v, p in raw]
        if not pairs:
            raise ValueError("a finite-support law needs at least one atom")
        exact = all(_is_exact(v) and _is_exact(p) for v, p in pairs)
        if not exact:
            pairs = [(float(v), float(p)) for v, p in pairs]
            if not all(math.isfinite(v) and math.isfinite(p) for v, p in pairs):
                raise ValueError("atoms and probabilities must be finite")
        pairs.sort(key=lambda vp: vp[0])
        for (v0, _), (v1, _) in zip(pairs, pairs[1:]):
            if not v0 < v1:
                raise ValueError(f"duplicate atom at {v0!r}; values must be strictly increasing")
        if any(not p > 0 for _, p in pairs):
            raise ValueError("probabilities must be strictly positive")
        total = sum(p for _, p in pairs) if exact else math.fsum(p for _, p in pairs)
        if abs(total - 1) > PROB_TOL:
            raise ValueError(f"probabilities sum to {float(total)!r}, not 1")
        if total != 1:
            pairs = [(v, p / total) for v, p in pairs]
        object.__setattr__(self, "points", tuple(pairs))

    @property
    def values(self):
        return tuple(v for v, _ in self.points)

    @property
    def probs(self):
        return tuple(p for _, p in self.points)

    @property
    def exact(self):
        return all(_is_exact(v) and _is_exact(p) for v, p in self.points)

    def _sum(self, terms):
        return sum(terms) if self.exact else math.fsum(terms)

    def mean(self):
        return self._sum(p * v for v, p in self.points)

    def variance(self):
        m = self.mean()
        return self._sum(p * (v - m) ** 2 for v, p in self.points)

    def positive_part(self, x):
        if not (self.exact and _is_exact(x)):
            x = float(x)
        return self._sum(p * (v - x) for v, p in self.points if v > x)

    def negative_part(self, x):
        if not (self.exact and _is_exact(x)):
            x = float(x)
        return self._sum(p * (x - v) for v, p in self.points if v < x)

    def sample(self, rng, size=None):
        gen = as_generator(rng)
        values = np.array([float(v) for v in self.values])
        probs = np.array([float(p) for p in self.probs])
        idx = np.searchsorted(np.cumsum(probs), gen.random(size), side="right")
        idx = np.minimum(idx, len(values) - 1)
        return float(values[idx]) if size is None else values[idx]

    def to_finite(self):
        return self

    def to_float(self):
        return FiniteSupport(tuple((float(v), float(p)) for v, p in self.points))

    def prob_at(self, value):
        i = bisect.bisect_left(self.values, value)
        if i < len(self.points) and self.points[i][0] == value:
            return self.points[i][1]
        return 0

    def cdf(self, x):
        return self._sum(p for v, p in self.points if v <= x)


@dataclass(frozen=True)
class TwoPointOptimal:
    """The two-point law on ``x -/+ sqrt(sigma^2 + x^2)`` with mean 0 and variance sigma^2."""

    x: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    @property
    def half_width(self):
        return math.hypot(self.sigma, self.x)

    def to_finite(self):
        x, s, var = float(self.x), self.half_width, float(self.sigma) ** 2
        # s - x and s + x rationalized to avoid cancellation
        if x >= 0:
            p_up = var / (2.0 * s * (s + x))
            p_down = (s + x) / (2.0 * s)
        else:
            p_up = (s - x) / (2.0 * s)
            p_down = var / (2.0 * s * (s - x))
        return FiniteSupport(((x - s, p_down), (x + s, p_up)))

    def mean(self):
        return 0.0

    def variance(self):
        return float(self.sigma) ** 2

    def positive_part(self, x):
        return self.to_finite().positive_part(x)

    def negative_part(self, x):
        return self.to_finite().negative_part(x)

    def sample(self, rng, size=None):
        return self.to_finite().sample(rng, size)


@dataclass(frozen=True)
class FirstExit:
    """Law of B at the first exit from ``(-a, b)``: atoms -a and b, P(b) = a / (a + b)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be > 0")

    def to_finite(self):
        a, b = self.a, self.b
        if _is_exact(a) and _is_exact(b):
            a, b = Fraction(a), Fraction(b)
        else:
            a, b = float(a), float(b)
        return FiniteSupport(((-a, b / (a + b)), (b, a / (a + b))))

    def mean(self):
        return 0.0

    def variance(self):
        return float(self.a) * float(self.b)

    def positive_part(self, x):
        return self.to_finite().positive_part(x)

    def negative_part(self, x):
        return self.to_finite().negative_part(x)

    def sample(self, rng, size=None):
        return self.to_finite().sample(rng, size)


@dataclass(frozen=True)
class Normal:
    """Centered Gaussian law with standard deviation sigma."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    def mean(self):
        return 0.0

    def variance(self):
        return float(self.sigma) ** 2

    def positive_part(self, x):
        s = float(self.sigma)
        z = float(x) / s
        return s * norm_pdf(z) - float(x) * norm_sf(z)

    def negative_part(self, x):
        return self.positive_part(-float(x))

    def sample(self, rng, size=None):
        draw = as_generator(rng).standard_normal(size)
        return float(self.sigma) * (float(draw) if size is None else draw)


@dataclass(frozen=True)
class ShiftedExponential:
    """Law of ``sigma * (Y - 1)`` with Y standard exponential."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")

    def mean(self):
        return 0.0

    def variance(self):
        return float(self.sigma) ** 2

    def positive_part(self, x):
        s, x = float(self.sigma), float(x)
        if x < -s:
            return -x
        return s * math.exp(-(1.0 + x / s))

    def negative_part(self, x):
        s, x = float(self.sigma), float(x)
        c = x + s
        if c <= 0:
            return 0.0
        return c + s * math.expm1(-c / s)

    def sample(self, rng, size=None):
        draw = as_generator(rng).standard_exponential(size)
        return float(self.sigma) * ((float(draw) if size is None else draw) - 1.0)


TerminalDistribution = FiniteSupport | TwoPointOptimal | FirstExit | Normal | ShiftedExponential
CONTINUOUS = (Normal, ShiftedExponential)


def as_finite(dist):
    """Convert to :class:`FiniteSupport`, rejecting continuous families."""
    if isinstance(dist, CONTINUOUS):
        raise NonFiniteSupport(f"{type(dist).__name__} has no finite support")
    return dist.to_finite()


def point_mass(value=0):
    return FiniteSupport(((value, 1),))


def moments(dist):
    """Return ``(mean, variance)``."""
    return dist.mean(), dist.variance()


def expected_positive_part(dist, x):
    """E[(X - x)^+]."""
    return dist.positive_part(x)


def expected_negative_part(dist, x):
    """E[(X - x)^-] = E[(x - X)^+]."""
    return dist.negative_part(x)


def mirrored(dist):
    """Law of -X."""
    f = as_finite(dist)
    return FiniteSupport(tuple((-v, p) for v, p in f.points))


def sample(dist, rng, size=None):
    """Draw from ``dist`` using (and advancing) the caller's stream."""
    return dist.sample(rng, size)


@dataclass(frozen=True)
class PotentialFn:
    """Convex piecewise-linear ``x -> E|X - x|`` of a finite-support law.

    Outside the breakpoints the function continues with slope -1 on the left and
    +1 on the right, so it tends to ``|x - mean|``.
    """

    breakpoints: tuple
    values: tuple
    left_slope: int = field(default=-1)
    right_slope: int = field(default=1)

    @property
    def slopes(self):
        """Slopes of every linear piece, left tail and right tail included."""
        bp, vals = self.breakpoints, self.values
        inner = tuple((vals[i + 1] - vals[i]) / (bp[i + 1] - bp[i]) for i in range(len(bp) - 1))
        return (self.left_slope,) + inner + (self.right_slope,)

    @property
    def mean(self):
        return self.breakpoints[-1] - self.values[-1]

    def _scalar(self, x):
        bp, vals = self.breakpoints, self.values
        if x <= bp[0]:
            return vals[0] + (bp[0] - x)
        if x >= bp[-1]:
            return vals[-1] + (x - bp[-1])
        i = bisect.bisect_right(bp, x) - 1
        if x == bp[i]:
            return vals[i]
        t = (x - bp[i]) / (bp[i + 1] - bp[i])
        return vals[i] + t * (vals[i + 1] - vals[i])

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self._scalar(x)
        x = np.asarray(x, dtype=float)
        bp = np.array([float(b) for b in self.breakpoints])
        vals = np.array([float(v) for v in self.values])
        out = np.interp(x, bp, vals)
        out = np.where(x < bp[0], vals[0] + (bp[0] - x), out)
        return np.where(x > bp[-1], vals[-1] + (x - bp[-1]), out)


def potential(dist):
    """Exact potential ``E|X - x|`` of a finite-support law."""
    f = as_finite(dist)
    sum_ = f._sum
    values = tuple(sum_(p * abs(v - u) for v, p in f.points) for u in f.values)
    return PotentialFn(f.values, values)


def is_dilation(f, g, tol=None):
    """True iff ``g`` is a martingale dilation of ``f``.

    Both potentials are convex piecewise linear with the same asymptotes, so
    comparing them at the union of breakpoints decides the pointwise inequality.
    ``tol`` defaults to 0 for exact laws and ``MEAN_TOL`` when either is in
    floating point, where equal potentials can differ by rounding.
    """
    ff, gg = as_finite(f), as_finite(g)
    if tol is None:
        tol = 0 if ff.exact and gg.exact else MEAN_TOL
    mf, mg = ff.mean(), gg.mean()
    if abs(mf - mg) > MEAN_TOL:
        raise MeanMismatch(f"means differ: {float(mf)!r} vs {float(mg)!r}")
    pf, pg = potential(ff), potential(gg)
    grid = sorted(set(ff.values) | set(gg.values))
    return all(pg(u) >= pf(u) - tol for u in grid)


# --- text grammar -----------------------------------------------------------

def parse_distribution(text):
    """Parse ``finite:v=p,...``, ``twopoint-opt:x=,sigma=``, ``firstexit:a=,b=``,
    ``normal:sigma=`` or ``exp:sigma=``."""
    kind, body = split_kind(text)
    if kind == "finite":
        pairs = []
        for item in filter(None, (s.strip() for s in body.split(","))):
            v, sep, p = item.partition("=")
            if not sep:
                raise ParseError(f"expected value=prob, got {item!r}")
            pairs.append((parse_number(v.strip(), "atom"), parse_number(p.strip(), "probability")))
        try:
            return FiniteSupport(tuple(pairs))
        except ValueError as exc:
            raise ValidationError("dist", str(exc)) from None
    try:
        if kind in ("twopoint-opt", "twopoint"):
            kv = parse_keyvals(body, ("x", "sigma"))
            return TwoPointOptimal(kv["x"], kv["sigma"])
        if kind == "firstexit":
            kv = parse_keyvals(body, ("a", "b"))
            return FirstExit(kv["a"], kv["b"])
        if kind == "normal":
            return Normal(parse_keyvals(body, ("sigma",))["sigma"])
        if kind in ("exp", "exponential"):
            return ShiftedExponential(parse_keyvals(body, ("sigma",))["sigma"])
    except ParseError:
        raise
    except ValueError as exc:
        raise ValidationError("dist", str(exc)) from None
    raise ParseError(f"unknown distribution kind {kind!r}")


def format_distribution(dist):
    if isinstance(dist, FiniteSupport):
        return "finite:" + ",".join(f"{float(v)!r}={float(p)!r}" for v, p in dist.points)
    if isinstance(dist, TwoPointOptimal):
        return f"twopoint-opt:x={float(dist.x)!r},sigma={float(dist.sigma)!r}"
    if isinstance(dist, FirstExit):
        return f"firstexit:a={float(dist.a)!r},b={float(dist.b)!r}"
    if isinstance(dist, Normal):
        return f"normal:sigma={float(dist.sigma)!r}"
    if isinstance(dist, ShiftedExponential):
        return f"exp:sigma={float(dist.sigma)!r}"
    raise TypeError(type(dist).__name__)
