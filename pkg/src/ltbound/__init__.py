"""Sharp bounds on the expected local time of stopped Brownian motion.

The expected local time at ``x`` of Brownian motion stopped at a time with
``E[tau] = sigma^2`` is at most ``sqrt(sigma^2 + x^2) - |x|``; a two-stage exit
rule attains it. The package provides the bound, the exact law-based evaluator,
the attaining rule, Chacon-Walsh embeddings and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    bound_curve,
    closed_form_exponential,
    closed_form_first_exit,
    closed_form_normal,
    report_exact,
    sharp_bound,
    upcrossing_bound,
)
from .distributions import (
    FiniteSupport,
    FirstExit as FirstExitLaw,
    Normal,
    ShiftedExponential,
    TwoPointOptimal,
    is_dilation,
    parse_distribution,
    potential,
)
from .embedding import EmbeddingPlan, chacon_walsh_plan, verify_plan
from .errors import *  # noqa: F401,F403
from .harness import ExperimentSpec, parse_spec, run_experiment, run_sweep
from .localtime import exact_expected_local_time, mc_expected_local_time
from .stopping import (
    FirstExit,
    FirstHit,
    Interval,
    PlanSequence,
    TimeCap,
    TwoStage,
    optimal_rule,
    parse_rule,
)
