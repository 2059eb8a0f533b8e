"""Experiment orchestration: specs, runs, sweeps and report emission."""

import csv
import io
import math
import os
from dataclasses import asdict, dataclass, field

from .bounds import bound_curve, sharp_bound
from .embedding import terminal_law_of_rule
from .ensemble import default_cap, simulate_ensemble
from .errors import ParseError, ValidationError
from .localtime import METHODS, OCCUPATION, UPCROSSING, default_epsilon, exact_expected_local_time
from .stopping import format_rule, optimal_rule, parse_rule

CSV_COLUMNS = ("x", "sigma", "bound", "exact", "method", "estimate", "std_error", "n_paths",
               "dt", "epsilon", "capped_fraction", "seed")

# additive discretization allowance per method, at dt = 1e-4 and eps = 0.02
ALLOWANCE = {OCCUPATION: 0.03, UPCROSSING: 0.05}
N_SE = 3.0

DEFAULT_DT = 1e-4
DEFAULT_PATHS = 10_000
SEED_ENV = "LOCALTIME_SEED"


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(SEED_ENV, f"not an integer: {raw!r}") from None


@dataclass(frozen=True)
class ExperimentSpec:
    rule: object
    xs: tuple
    n_paths: int = DEFAULT_PATHS
    dt: float = DEFAULT_DT
    epsilon: float | None = None
    methods: tuple = METHODS
    seed: int = 0
    cap: float | None = None

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        if not xs:
            raise ValidationError("xs", "at least one level is required")
        if not all(math.isfinite(x) for x in xs):
            raise ValidationError("xs", "levels must be finite")
        if int(self.n_paths) != self.n_paths or self.n_paths < 2:
            raise ValidationError("paths", "need an integer >= 2")
        if not self.dt > 0:
            raise ValidationError("dt", "must be > 0")
        eps = default_epsilon(self.dt) if self.epsilon is None else float(self.epsilon)
        if not eps > 0:
            raise ValidationError("epsilon", "must be > 0")
        methods = tuple(m for m in METHODS if m in set(self.methods))
        unknown = set(self.methods) - set(METHODS)
        if unknown or not methods:
            raise ValidationError("methods", f"choose from {', '.join(METHODS)}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed", "must be an unsigned 64-bit integer")
        cap = self.cap
        if cap is None:
            try:
                cap = default_cap(self.rule)
            except ValueError as exc:
                raise ValidationError("cap", str(exc)) from None
        if not cap > 0 or cap < self.dt:
            raise ValidationError("cap", "must be >= dt > 0")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "n_paths", int(self.n_paths))
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "cap", float(cap))


@dataclass(frozen=True)
class SummaryRow:
    x: float
    sigma: float
    bound: float
    exact: float | None
    method: str
    estimate: float
    std_error: float
    n_paths: int
    dt: float
    epsilon: float
    capped_fraction: float
    seed: int

    @property
    def ratio(self):
        return self.estimate / self.bound

    @property
    def allowance(self):
        return ALLOWANCE[self.method]

    def tolerance(self):
        """Statistical band plus discretization allowance."""
        return N_SE * self.std_error + self.allowance

    def within_bound(self):
        return self.estimate <= self.bound + N_SE * self.std_error + ALLOWANCE[UPCROSSING]


@dataclass
class EstimateSummary:
    rows: list
    rule: str = ""
    tau_mean: float = math.nan
    tau_std_error: float = math.nan
    terminal_counts: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)

    def to_records(self):
        return [asdict(r) for r in self.rows]

    def to_report(self):
        return {
            "rule": self.rule,
            "allowance": dict(ALLOWANCE),
            "n_se": N_SE,
            "tau_mean": self.tau_mean,
            "tau_std_error": self.tau_std_error,
            "rows": self.to_records(),
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def rows_for(self, x, method=None):
        return [r for r in self.rows if r.x == x and (method is None or r.method == method)]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run_experiment(spec, workers=1, sigma=None):
    """Simulate ``spec`` and tabulate bound, exact value and MC estimates per (x, method).

    ``sigma`` defaults to the standard deviation of the rule's terminal law (or the
    empirical one when the rule has no closed-form law); pass it when it is known
    exactly so the bound column is not perturbed by rounding in the law.
    """
    law = terminal_law_of_rule(spec.rule)
    ens = simulate_ensemble(spec.rule, spec.xs, spec.n_paths, spec.dt, spec.epsilon,
                            seed=spec.seed, cap=spec.cap, workers=workers)
    if sigma is not None:
        pass
    elif law is not None:
        sigma = math.sqrt(float(law.variance()))
    else:
        # no closed form: use the empirical second moment of B(tau)
        sigma = math.sqrt(ens.terminal_sq.mean)
    rows = []
    for i in sorted(range(len(spec.xs)), key=lambda i: spec.xs[i]):
        x = spec.xs[i]
        bound = sharp_bound(x, sigma)
        exact = float(exact_expected_local_time(law, x)) if law is not None else None
        for method in spec.methods:
            acc = ens.occupation[i] if method == OCCUPATION else ens.upcrossing[i]
            rows.append(SummaryRow(
                x=x, sigma=sigma, bound=bound, exact=exact, method=method,
                estimate=acc.mean, std_error=acc.std_error, n_paths=acc.count,
                dt=spec.dt, epsilon=spec.epsilon, capped_fraction=ens.capped_fraction,
                seed=spec.seed,
            ))
    return EstimateSummary(
        rows=rows,
        rule=format_rule(spec.rule),
        tau_mean=ens.tau.mean,
        tau_std_error=ens.tau.std_error,
        terminal_counts=dict(sorted(ens.terminal_counts.items())),
    )


def run_sweep(sigma, x_grid, n_paths, dt, epsilon=None, seed=0, methods=(OCCUPATION,),
              workers=1):
    """Run the optimal rule for each x and report its estimate against the bound curve."""
    if not sigma > 0:
        raise ValidationError("sigma", "must be > 0")
    xs = [float(x) for x in x_grid]
    if not xs:
        raise ValidationError("xs", "empty grid")
    rows = []
    for x in xs:
        spec = ExperimentSpec(optimal_rule(x, sigma), (x,), n_paths, dt, epsilon, methods, seed)
        rows.extend(run_experiment(spec, workers=workers, sigma=sigma).rows)
    return EstimateSummary(rows=rows, rule=f"optimal:sigma={sigma!r}",
                           curve=bound_curve(sigma, xs))


def curve_csv(curve):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x", "bound"))
    for x, b in curve:
        w.writerow((repr(float(x)), repr(float(b))))
    return buf.getvalue()


# --- config documents ---------------------------------------------------------

SPEC_KEYS = ("rule", "xs", "paths", "dt", "epsilon", "methods", "seed", "cap")
_ALIASES = {"n_paths": "paths", "eps": "epsilon"}


def parse_grid(text):
    """``start:stop:step`` (inclusive) or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ParseError(f"grid must be start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ParseError(f"non-numeric grid {text!r}") from None
        if not step > 0 or stop < start:
            raise ValidationError("xs", "grid needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9))
        return tuple(start + k * step for k in range(n + 1))
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ParseError(f"non-numeric level list {text!r}") from None


def _read_document(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = _ALIASES.get(key.strip().lower(), key.strip().lower())
        if not sep:
            raise ParseError(f"expected key=value, got {line!r}", line=lineno)
        if key not in SPEC_KEYS:
            raise ParseError(f"unknown key {key!r}", line=lineno)
        entries[key] = (value.strip(), lineno)
    return entries


def parse_spec(text, overrides=None):
    """Build an :class:`ExperimentSpec` from a flat ``key=value`` document.

    ``overrides`` maps the same keys to text values and wins over the document
    (this is how command-line flags are layered over a config file).
    """
    entries = _read_document(text)
    for key, value in (overrides or {}).items():
        key = _ALIASES.get(key, key)
        if key not in SPEC_KEYS:
            raise ParseError(f"unknown key {key!r}")
        if value is not None:
            entries[key] = (str(value), None)

    def get(key, conv, default=None):
        if key not in entries:
            return default
        value, line = entries[key]
        try:
            return conv(value)
        except ValidationError as exc:
            raise ValidationError(key, exc.message, line=line) from None
        except ParseError as exc:
            raise ParseError(f"{key}: {exc}", line=line) from None
        except ValueError as exc:
            raise ValidationError(key, str(exc), line=line) from None

    if "rule" not in entries:
        raise ValidationError("rule", "missing required field")
    if "xs" not in entries:
        raise ValidationError("xs", "missing required field")
    rule = get("rule", parse_rule)
    xs = get("xs", parse_grid)
    dt = get("dt", float, DEFAULT_DT)
    kwargs = dict(
        rule=rule,
        xs=xs,
        n_paths=get("paths", int, DEFAULT_PATHS),
        dt=dt,
        epsilon=get("epsilon", float),
        methods=get("methods", lambda s: tuple(m.strip() for m in s.split(",") if m.strip()),
                    METHODS),
        seed=get("seed", int, None),
        cap=get("cap", float),
    )
    if kwargs["seed"] is None:
        kwargs["seed"] = default_seed()
    try:
        return ExperimentSpec(**kwargs)
    except ValidationError as exc:
        line = entries.get(exc.field, (None, None))[1]
        if line is not None:
            raise ValidationError(exc.field, exc.message, line=line) from None
        raise
