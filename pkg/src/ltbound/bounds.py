"""Closed-form sharp bounds and reference values for expected local time."""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import norm_pdf, norm_sf
from .errors import NegativeX, OutOfInterval, OutOfRegime


def sharp_bound(x, sigma):
    """Largest E[L_x] over stopping times with E[tau] = sigma^2.

    Evaluated as ``sigma^2 / (sqrt(sigma^2 + x^2) + |x|)``, which equals
    ``sqrt(sigma^2 + x^2) - |x|`` without the cancellation for |x| >> sigma.
    Vectorizes over ``x``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if np.ndim(x) == 0:
        x = abs(float(x))
        return sigma * (sigma / (math.hypot(sigma, x) + x))
    x = np.abs(np.asarray(x, dtype=float))
    return sigma * (sigma / (np.hypot(sigma, x) + x))


def sharp_bound_subtractive(x, sigma):
    """The unrationalized form; for comparison only."""
    return math.sqrt(sigma * sigma + x * x) - abs(x)


def upcrossing_bound(x, b, sigma):
    """Sharp bound on expected upcrossings of ``(x, b)``, valid when ``b - x <= sigma``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if not b > x:
        raise ValueError("need b > x")
    if b - x > sigma:
        raise OutOfRegime(f"b - x = {b - x:g} exceeds sigma = {sigma:g}; no closed form there")
    return sharp_bound(x, sigma) / (2.0 * (b - x))


def closed_form_first_exit(a, b, x):
    """E[L_x] at the first exit from ``(-a, b)``: ``2a(b - x)/(a + b)`` on ``[0, b]``."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be > 0")
    if not -a <= x <= b:
        raise OutOfInterval(f"x = {x:g} outside [-{a:g}, {b:g}]")
    if x >= 0:
        return 2.0 * a * (b - x) / (a + b)
    return 2.0 * b * (a + x) / (a + b)


def closed_form_normal(sigma, x):
    """E[L_x] when ``B(tau) ~ N(0, sigma^2)``: ``2 sigma phi(x/sigma) - 2 x Phibar(x/sigma)``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    x = abs(x)
    z = x / sigma
    return 2.0 * sigma * norm_pdf(z) - 2.0 * x * norm_sf(z)


def closed_form_exponential(sigma, x):
    """E[L_x] when ``B(tau) = sigma (Y - 1)``, ``Y ~ Exp(1)``, for ``x >= 0``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    if x < 0:
        raise NegativeX("the exponential closed form holds for x >= 0 only")
    return sigma * (2.0 / math.e) * math.exp(-x / sigma)


def bound_curve(sigma, xs):
    """``[(x, sharp_bound(x, sigma)), ...]`` for plotting."""
    return [(float(x), sharp_bound(float(x), sigma)) for x in xs]


@dataclass(frozen=True)
class BoundReport:
    """A reference value (exact or Monte Carlo) set against the sharp bound."""

    x: float
    sigma: float
    bound: float
    reference_value: float
    source: str  # "exact" or "mc"

    @property
    def ratio(self):
        return self.reference_value / self.bound

    def within_bound(self, slack=1e-9):
        return self.ratio <= 1.0 + slack


def report_exact(dist, x):
    """BoundReport for the exact E[L_x] of a mean-zero law with finite variance."""
    from .localtime import exact_expected_local_time

    sigma = math.sqrt(float(dist.variance()))
    return BoundReport(float(x), sigma, sharp_bound(x, sigma),
                       float(exact_expected_local_time(dist, x)), "exact")
