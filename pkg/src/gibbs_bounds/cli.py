"""Command-line front end.

Exit status: 0 success, 2 usage error, 3 precondition violation,
4 oracle mismatch, 5 coverage failure.
"""

import argparse
import csv
import io
import itertools
import json
import logging
import math
import numbers
import sys

from . import bounds as B
from ._validation import DomainError
from .knn import brute_force_average_holdout_error, gibbs_average_holdout_error, load_dataset
from .simulate import BoundSpec, ExperimentConfig
from .telescope import OptimizerGrid, brute_force_optimize, geometric_j_candidates, optimize_schedule

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_MISMATCH, EXIT_COVERAGE = 0, 2, 3, 4, 5

KNN_TOLERANCE = 1e-12

_KIND_ALIASES = {
    "analytic": "analytic_envelope",
    "observed": "ensemble_nearly_uniform_observed",
    "epsilon_star": "closed_form",
}

DEFAULT_SIM_BOUNDS = (
    "ensemble_uniform",
    "ensemble_nearly_uniform:j=1",
    "ensemble_nearly_uniform:j=5",
    "ensemble_nearly_uniform:j=20",
    "optimized:t=2;delta_increment=0.0001",
    "closed_form:c=3",
)


# -- serialization -----------------------------------------------------------


def _number(x, precision):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, numbers.Integral):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, f".{precision}g")


def to_json(obj, precision=17):
    """JSON text with floats written to ``precision`` significant digits."""
    if obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (numbers.Number, bool)):
        return _number(obj, precision)
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {to_json(v, precision)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v, precision) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(value, precision):
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v, precision) for v in value)
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    return _number(value, precision)


def render(payload, fmt):
    rows = payload if isinstance(payload, list) else [payload]
    if fmt == "json":
        return to_json(payload) + "\n"
    if fmt == "csv":
        columns = list(dict.fromkeys(k for row in rows for k in row))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c), 17) for c in columns])
        return buf.getvalue()
    lines = []
    for row in rows:
        lines.extend(f"{k}: {_cell(v, 6)}" for k, v in row.items())
        lines.append("")
    return "\n".join(lines)


# -- argument types ----------------------------------------------------------


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _schedule(text):
    js, sep, ds = text.partition("/")
    if not sep:
        raise argparse.ArgumentTypeError("schedule must look like 'j1,j2/d1,d2,d3'")
    return _float_list(js), _float_list(ds)


def _kind(text):
    kind = text.replace("-", "_")
    kind = _KIND_ALIASES.get(kind, kind)
    if kind not in {k.value for k in B.BoundKind} - {"full_classifier"}:
        raise argparse.ArgumentTypeError(f"unknown bound kind {text!r}")
    return kind


def _read_rates(path):
    with open(path) as fh:
        text = fh.read().replace(",", " ")
    return tuple(float(v) for v in text.split())


# -- subcommands -------------------------------------------------------------


def evaluate_bound(kind, m, n, delta, s=None, j=None, c=3.0, schedule=None, rates=None):
    ctx = B.BoundContext(m, n, delta)
    ens = B.EnsembleSpec(m if s is None else s, rates)

    def need_j():
        if j is None:
            raise DomainError(f"--j is required for kind {kind}")
        return j

    if kind == "uniform":
        return B.uniform_epsilon(ctx)
    if kind == "nearly_uniform":
        return B.nearly_uniform_epsilon(ctx, need_j())
    if kind == "ensemble_uniform":
        return B.ensemble_uniform_epsilon(ctx, ens)
    if kind == "ensemble_nearly_uniform":
        return B.ensemble_nearly_uniform_epsilon(ctx, ens, need_j())
    if kind == "ensemble_nearly_uniform_observed":
        if rates is None:
            raise DomainError("--rates is required for the observed-rate bound")
        jj = need_j()
        if not float(jj).is_integer():
            raise DomainError("the observed-rate bound needs an integer j")
        return B.ensemble_nearly_uniform_epsilon_observed(ctx, ens, int(jj))
    if kind == "telescoping":
        if schedule is None:
            raise DomainError("--schedule is required for the telescoping bound")
        return B.telescoping_epsilon(ctx, ens, B.Schedule(tuple(schedule[0]), tuple(schedule[1])))
    if kind == "closed_form":
        return B.epsilon_star(ctx, ens, c)
    if kind == "analytic_envelope":
        return B.epsilon_star_analytic_bound(ctx, ens, c)
    raise DomainError(f"unsupported kind {kind}")


def cmd_bound(args):
    rates = _read_rates(args.rates) if args.rates else None
    s = args.s
    if rates is not None and s is None:
        s = len(rates)
    result = evaluate_bound(
        args.kind, args.m, args.n, args.delta, s, args.j, args.c, args.schedule, rates
    )
    out = {"m": args.m, "n": args.n, "s": args.m if s is None else s, "delta": args.delta}
    if args.disagreement is not None:
        out["gibbs_epsilon"] = result.epsilon
        result = B.extend_full_classifier_bound(result, args.disagreement)
        out["disagreement_rate"] = args.disagreement
    out.update(result.to_dict())
    return out, EXIT_OK


def _grid(args, s):
    spec = args.j_grid
    if spec == "integer":
        cands = None
    elif spec.startswith("geometric:"):
        cands = geometric_j_candidates(s, float(spec.split(":", 1)[1]), args.t)
    else:
        cands = tuple(_float_list(spec))
    return OptimizerGrid(args.t, args.delta_increment, cands)


def cmd_optimize(args):
    ctx = B.BoundContext(args.m, args.n, args.delta)
    s = args.m if args.s is None else args.s
    ens = B.EnsembleSpec(s)
    grid = _grid(args, s)
    sched, result = optimize_schedule(ctx, ens, grid)
    out = {"m": args.m, "n": args.n, "s": s, "delta": args.delta, "t": grid.t}
    out.update(result.to_dict())
    status = EXIT_OK
    if args.brute_force_check:
        _, brute = brute_force_optimize(ctx, ens, grid, cap=args.cap)
        out["brute_force_epsilon"] = brute.epsilon
        out["match"] = brute.epsilon_raw == result.epsilon_raw
        if not out["match"]:
            logging.error("DP optimum %r differs from exhaustive %r", result.epsilon_raw, brute.epsilon_raw)
            status = EXIT_MISMATCH
    return out, status


def cmd_knn(args):
    data = load_dataset(args.data, args.n_holdout, header=args.header, delimiter=args.delimiter)
    value = gibbs_average_holdout_error(data, args.k)
    out = {"points": len(data), "r": data.r, "n": data.n, "k": args.k, "average_holdout_error": value}
    status = EXIT_OK
    if args.oracle:
        oracle = brute_force_average_holdout_error(data, args.k, cap=args.cap)
        out["oracle_average_holdout_error"] = oracle
        out["match"] = abs(oracle - value) <= KNN_TOLERANCE
        if not out["match"]:
            logging.error("DP value %r differs from enumeration %r", value, oracle)
            status = EXIT_MISMATCH
    return out, status


def _world_dict(text):
    dist, _, rest = text.partition(":")
    vals = _float_list(rest) if rest else []
    if dist == "uniform":
        low, high = vals if vals else (0.0, 0.5)
        return {"distribution": "uniform", "low": low, "high": high}
    if dist == "two_point":
        return dict(zip(("p_low", "p_high", "fraction_low"), vals), distribution="two_point")
    if dist == "fixed":
        return {"distribution": "fixed", "rates": vals}
    raise DomainError(f"unknown world {text!r}")


def cmd_simulate(args):
    if args.config:
        config = ExperimentConfig.load(args.config)
    else:
        missing = [f for f in ("m", "n") if getattr(args, f) is None]
        if missing:
            raise DomainError("simulate needs --config or --" + " and --".join(missing))
        config = ExperimentConfig(
            m=args.m,
            n=args.n,
            s=args.s,
            delta=args.delta,
            trials=args.trials,
            seed=args.seed,
            world=_world_dict(args.world),
            bounds=[BoundSpec.parse(b) for b in (args.bound or DEFAULT_SIM_BOUNDS)],
            rule=args.rule,
            tau=args.tau,
        )
    report = config.run()
    rows = []
    for entry in report.entries:
        row = {"trials": report.trials, "seed": report.seed, "delta": report.delta}
        row.update(entry.to_dict())
        row["sound"] = entry.frequency <= report.delta
        rows.append(row)
    failed = report.failures
    if failed:
        logging.error("violation frequency exceeds delta for: %s", ", ".join(failed))
    return rows, EXIT_COVERAGE if failed else EXIT_OK


def cmd_sweep(args):
    ms = args.m
    rows = []
    for m, n, delta, c in itertools.product(ms, args.n, args.delta, args.c):
        if args.ratio is not None:
            if m % args.ratio:
                raise DomainError(f"m={m} is not a multiple of --ratio {args.ratio}")
            s_values = [m // args.ratio]
        else:
            s_values = args.s or [m]
        for s, j in itertools.product(s_values, args.j or [None]):
            result = evaluate_bound(args.kind, m, n, delta, s, j, c)
            row = {"m": m, "s": s, "n": n, "delta": delta, "c": c}
            if j is not None:
                row["j"] = j
            row.update(kind=result.kind.value, epsilon=result.epsilon, epsilon_raw=result.epsilon_raw)
            rows.append(row)
    return rows, EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gibbs-bounds", description="Error bounds for Gibbs ensemble classifiers."
    )
    fmt = argparse.ArgumentParser(add_help=False)
    fmt.add_argument("--format", choices=("json", "csv", "human"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", parents=[fmt], help="evaluate one bound")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--j", type=float)
    p.add_argument("--c", type=float, default=3.0)
    p.add_argument("--schedule", type=_schedule, help="j1,...,jt/d1,...,d(t+1)")
    p.add_argument("--rates", help="file of observed validation error rates")
    p.add_argument("--disagreement", type=float, help="extend to the full classifier")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("optimize", parents=[fmt], help="optimize a telescoping schedule")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--delta-increment", type=float, default=1e-4)
    p.add_argument("--j-grid", default="integer", help="'integer', 'geometric:C' or a comma list")
    p.add_argument("--brute-force-check", action="store_true")
    p.add_argument("--cap", type=int, default=10**7)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("knn-gibbs", parents=[fmt], help="exact k-NN average holdout error")
    p.add_argument("--data", required=True)
    p.add_argument("--n-holdout", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--header", action="store_true")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--oracle", action="store_true", help="cross-check by enumerating splits")
    p.add_argument("--cap", type=int, default=10**6)
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("simulate", parents=[fmt], help="Monte Carlo coverage experiment")
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rule", choices=("lowest_s", "random_s", "threshold"), default="lowest_s")
    p.add_argument("--tau", type=float)
    p.add_argument("--world", default="uniform:0,0.5")
    p.add_argument("--bound", action="append", help="e.g. ensemble_nearly_uniform:j=5")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[fmt], help="tabulate epsilon over a parameter grid")
    p.add_argument("--kind", type=_kind, default="analytic_envelope")
    p.add_argument("--m", type=_int_list, required=True)
    p.add_argument("--s", type=_int_list)
    p.add_argument("--ratio", type=int, help="set s = m / ratio")
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--delta", type=_float_list, default=[0.05])
    p.add_argument("--c", type=_float_list, default=[3.0])
    p.add_argument("--j", type=_float_list)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        payload, status = args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    sys.stdout.write(render(payload, args.format))
    return status


if __name__ == "__main__":
    sys.exit(main())
