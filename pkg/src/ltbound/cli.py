"""Command-line front end.

Exit codes: 0 ok, 1 acceptance/verification failure, 2 usage or validation error.
Human output rounds to 6 significant digits; ``--json`` output is full precision.
"""

import argparse
import json
import math
import sys
from pathlib import Path

from . import __version__
from .bounds import sharp_bound, upcrossing_bound
from .distributions import parse_distribution
from .embedding import chacon_walsh_plan, format_plan, serialize_plan, verify_plan
from .ensemble import simulate_ensemble
from .errors import AllPathsCapped, LocalTimeError, OutOfRegime
from .harness import (
    CSV_COLUMNS,
    DEFAULT_DT,
    ExperimentSpec,
    curve_csv,
    default_seed,
    parse_grid,
    parse_spec,
    run_experiment,
    run_sweep,
)
from .localtime import METHODS, OCCUPATION, default_epsilon, exact_expected_local_time

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad flag value; the message names the flag."""


def fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _write(path, text):
    Path(path).write_text(text)


def _emit(args, human, payload):
    """Print (or write to ``--out``) either the human text or the JSON payload."""
    text = json.dumps(payload, indent=2) + "\n" if args.json else human.rstrip("\n") + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)


def _positive(name, value):
    if value is None or not (value > 0 and math.isfinite(value)):
        raise UsageError(f"{name}: must be a finite number > 0")
    return value


def _seed(value):
    return default_seed() if value is None else value


def _table(rows, columns):
    cells = [[fmt(getattr(r, c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) if cells else len(c)
              for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


# --- subcommands --------------------------------------------------------------

def cmd_bound(args):
    sigma = _positive("--sigma", args.sigma)
    value = sharp_bound(args.x, sigma)
    payload = {"x": args.x, "sigma": sigma, "sharp_bound": value}
    if args.b is None:
        human = fmt(value)
    else:
        try:
            up = upcrossing_bound(args.x, args.b, sigma)
        except OutOfRegime as exc:
            raise UsageError(f"--b: {exc}") from None
        except ValueError as exc:
            raise UsageError(f"--b: {exc}") from None
        payload.update(b=args.b, upcrossing_bound=up)
        human = f"sharp_bound {fmt(value)}\nupcrossing_bound {fmt(up)}"
    _emit(args, human, payload)
    return EXIT_OK


def cmd_exact(args):
    dist = parse_distribution(args.dist)
    value = float(exact_expected_local_time(dist, args.x))
    _emit(args, fmt(value), {"dist": args.dist, "x": args.x, "expected_local_time": value})
    return EXIT_OK


def _spec_from_args(args):
    overrides = {
        "rule": args.rule,
        "xs": args.xs,
        "paths": args.paths,
        "dt": args.dt,
        "epsilon": args.epsilon,
        "methods": args.methods,
        "seed": args.seed,
        "cap": args.cap,
    }
    text = Path(args.config).read_text() if args.config else ""
    return parse_spec(text, overrides)


def _summary_text(summary):
    lines = [f"rule {summary.rule}",
             _table(summary.rows, ("x", "bound", "exact", "method", "estimate", "std_error"))]
    if not math.isnan(summary.tau_mean):
        lines.append(f"E[tau] {fmt(summary.tau_mean)} +/- {fmt(summary.tau_std_error)}")
    if summary.rows:
        lines.append(f"capped_fraction {fmt(summary.rows[0].capped_fraction)}")
    return "\n".join(lines)


def cmd_simulate(args):
    spec = _spec_from_args(args)
    summary = run_experiment(spec, workers=args.threads)
    payload = summary.to_report()
    if args.out:
        _write(args.out, json.dumps(payload, indent=2) + "\n" if args.json else summary.to_csv())
    if args.dump_path:
        from .brownian import simulate_path
        from .streams import make_generator

        path = simulate_path(spec.rule, spec.dt, spec.cap, make_generator(spec.seed, 0))
        _write(args.dump_path, "t,value\n" + "".join(
            f"{t!r},{v!r}\n" for t, v in zip(path.times.tolist(), path.values.tolist())))
    if not args.quiet and not args.out:
        sys.stdout.write(json.dumps(payload, indent=2) + "\n" if args.json
                         else _summary_text(summary) + "\n")
    elif not args.quiet:
        sys.stdout.write(_summary_text(summary) + "\n")
    return EXIT_OK


def cmd_sweep(args):
    sigma = _positive("--sigma", args.sigma)
    xs = parse_grid(args.xs)
    methods = tuple(m.strip() for m in args.methods.split(",")) if args.methods else (OCCUPATION,)
    summary = run_sweep(sigma, xs, args.paths, args.dt, args.epsilon, _seed(args.seed),
                        methods, workers=args.threads)
    curve = curve_csv(summary.curve)
    if args.out:
        _write(args.out, json.dumps(summary.to_report(), indent=2) + "\n" if args.json
               else summary.to_csv())
        curve_path = args.curve or str(Path(args.out).with_suffix("")) + "_curve.csv"
    else:
        curve_path = args.curve
    if curve_path:
        _write(curve_path, curve)
    if args.json and not args.out:
        report = summary.to_report()
        report["curve"] = [{"x": x, "bound": b} for x, b in summary.curve]
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    elif not args.quiet:
        sys.stdout.write(_table(summary.rows, ("x", "bound", "method", "estimate",
                                               "std_error", "ratio")) + "\n")
    return EXIT_OK


def cmd_embed(args):
    target = parse_distribution(args.target)
    plan = chacon_walsh_plan(target)
    payload = {"target": args.target, "plan": serialize_plan(plan),
               "steps": [[float(s.lower), float(s.upper)] for s in plan.steps]}
    lines = [format_plan(plan, digits=6)]
    code = EXIT_OK
    if args.verify:
        rep = verify_plan(plan)
        payload["report"] = {"exact_match": rep.exact_match, "max_prob_gap": rep.max_prob_gap,
                             "potential_gap": rep.potential_gap, "monotone": rep.monotone}
        lines.append(f"exact_match {rep.exact_match}  max_prob_gap {fmt(rep.max_prob_gap)}  "
                     f"potential_gap {fmt(rep.potential_gap)}  monotone {rep.monotone}")
        if not (rep.exact_match and rep.monotone):
            code = EXIT_FAIL
    if args.simulate:
        if len(plan) == 0:
            raise UsageError("--simulate: the target is a point mass at 0; nothing to run")
        spec = ExperimentSpec(plan.as_rule(), (0.0,), args.simulate, args.dt, None,
                              (OCCUPATION,), _seed(args.seed))
        summary = run_experiment(spec, workers=args.threads)
        n = sum(summary.terminal_counts.values())
        freq = []
        for v, p in plan.target.points:
            hits = summary.terminal_counts.get(float(v), 0)
            freq.append({"value": float(v), "target": float(p), "observed": hits / n})
            lines.append(f"  {fmt(float(v))}: target {fmt(float(p))}  observed {fmt(hits / n)}")
        payload["simulation"] = {"n_paths": n, "frequencies": freq,
                                 "tau_mean": summary.tau_mean}
    if args.out and not args.json:
        _write(args.out, serialize_plan(plan) + "\n")
        sys.stdout.write("\n".join(lines) + "\n")
    else:
        _emit(args, "\n".join(lines), payload)
    return code


def cmd_upcross(args):
    spec = _spec_from_args(argparse.Namespace(
        rule=args.rule, xs=repr(args.x), paths=args.paths, dt=args.dt, epsilon=None,
        methods=None, seed=args.seed, cap=args.cap, config=None))
    if not args.b > args.x:
        raise UsageError("--b: must exceed --x")
    ens = simulate_ensemble(spec.rule, spec.xs, spec.n_paths, spec.dt, spec.epsilon,
                            seed=spec.seed, cap=spec.cap, workers=args.threads,
                            windows=[(args.x, args.b)])
    from .embedding import terminal_law_of_rule

    law = terminal_law_of_rule(spec.rule)
    sigma = math.sqrt(float(law.variance())) if law is not None else math.sqrt(ens.terminal_sq.mean)
    counts = ens.window_counts[0]
    try:
        bound = upcrossing_bound(args.x, args.b, sigma)
    except OutOfRegime as exc:
        raise UsageError(f"--b: {exc}") from None
    payload = {"x": args.x, "b": args.b, "sigma": sigma, "mean_upcrossings": counts.mean,
               "std_error": counts.std_error, "upcrossing_bound": bound,
               "n_paths": counts.count, "dt": spec.dt, "seed": spec.seed}
    human = (f"mean_upcrossings {fmt(counts.mean)} +/- {fmt(counts.std_error)}\n"
             f"upcrossing_bound {fmt(bound)}")
    _emit(args, human, payload)
    return EXIT_OK


def cmd_verify(args):
    from .acceptance import run_all

    results = run_all(quick=args.quick, workers=args.threads)
    ok = all(r.passed for r in results)
    payload = {"passed": ok, "criteria": [
        {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail,
         "seconds": r.seconds} for r in results]}
    human = "\n".join(r.line() for r in results) + f"\n{'ALL PASS' if ok else 'FAILED'}"
    _emit(args, human, payload)
    return EXIT_OK if ok else EXIT_FAIL


# --- parser -------------------------------------------------------------------

def _common(p):
    p.add_argument("--json", action="store_true", help="full-precision JSON output")
    p.add_argument("--out", metavar="PATH", help="write the output here instead of stdout")


def _sim_flags(p, threads=True):
    p.add_argument("--paths", type=int, help="number of paths")
    p.add_argument("--dt", type=float, help=f"time step (default {DEFAULT_DT:g})")
    p.add_argument("--seed", type=int, help="base seed (default: $LOCALTIME_SEED or 0)")
    if threads:
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes; does not change results")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ltbound",
        description="Sharp bounds on the expected local time of stopped Brownian motion.",
        epilog="Negative values must be attached with '=', e.g. --xs=-0.5,0,0.5.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("bound", help="print sqrt(sigma^2 + x^2) - |x|")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--b", type=float, help="also print the upcrossing bound for (x, b)")
    _common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("exact", help="exact E[L_x] from the law of B(tau)")
    p.add_argument("--dist", required=True, help="e.g. normal:sigma=1 or finite:-1=0.5,1=0.5")
    p.add_argument("--x", type=float, required=True)
    _common(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="Monte Carlo estimates for a stopping rule")
    p.add_argument("--rule", help="e.g. firstexit:a=1,b=1 or optimal:x=0.75,sigma=1")
    p.add_argument("--xs", help="levels: comma list or start:stop:step")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--cap", type=float, help="time cap per path")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--dump-path", metavar="PATH", help="also write one path as t,value CSV")
    p.add_argument("--quiet", action="store_true", help="no summary on stdout")
    _sim_flags(p)
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="optimal rule at each x against the bound curve")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--xs", required=True, help="comma list or start:stop:step")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    p.add_argument("--curve", metavar="PATH", help="x,bound curve file "
                   "(default: <out>_curve.csv when --out is given)")
    p.add_argument("--quiet", action="store_true")
    _sim_flags(p)
    _common(p)
    p.set_defaults(func=cmd_sweep, paths=None)

    p = sub.add_parser("embed", help="Chacon-Walsh interval plan for a finite law")
    p.add_argument("--target", required=True, help="finite:v=p,...")
    p.add_argument("--verify", action="store_true", help="check the plan's terminal law")
    p.add_argument("--simulate", type=int, metavar="N", help="simulate N paths of the plan")
    _sim_flags(p)
    _common(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("upcross", help="mean upcrossings of (x, b) against the bound")
    p.add_argument("--rule", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--cap", type=float)
    _sim_flags(p)
    _common(p)
    p.set_defaults(func=cmd_upcross)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="fewer paths, wider bands")
    p.add_argument("--threads", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def _fill_defaults(args):
    if getattr(args, "threads", 1) is None or getattr(args, "threads", 1) < 1:
        raise UsageError("--threads: must be >= 1")
    if args.command in ("sweep", "embed", "upcross"):
        if args.paths is None:
            args.paths = 10_000
        if args.paths < 2:
            raise UsageError("--paths: must be >= 2")
        if args.dt is None:
            args.dt = DEFAULT_DT
        _positive("--dt", args.dt)
    if args.command == "sweep" and args.epsilon is None:
        args.epsilon = default_epsilon(args.dt)
    if args.command == "embed" and args.simulate is not None and args.simulate < 2:
        raise UsageError("--simulate: need at least 2 paths")


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        _fill_defaults(args)
        return args.func(args)
    except UsageError as exc:
        print(f"ltbound {args.command}: error: {exc}", file=sys.stderr)
    except AllPathsCapped as exc:
        print(f"ltbound {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (LocalTimeError, ValueError, OSError) as exc:
        print(f"ltbound {args.command}: error: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
