"""``truncstein`` command line: factor, solve, fault, limit, simulate.

JSON output is an envelope ``{command, parameters, results, tool_version}``
(see ``schemas/envelope.schema.json``); CSV output carries data rows only.
Floats are written with ``repr``, which round-trips exactly.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .distributions import DistParams, ParameterError, truncate, tv_distance
from .factors import brute_force_G2, exact_G2, monotonicity_sweep, poisson_limit_check
from .fault import CSV_HEADER, FaultParams, csv_row, order_p_sweep, proposition_bounds
from .simulate import (
    SimConfig,
    empirical_stationary,
    estimate_h_difference,
    generator_h_difference,
    mean_first_transition_from_zero,
    sharp_value_estimate,
    simulate_path,
)
from .stein import TestFunction, equation_residuals, solve_closed_form, solve_forward

FORMAT_ENV = "TRUNCSTEIN_FORMAT"


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _nb_pair(text: str) -> tuple[float, float]:
    vals = _float_list(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"--nb takes r,p, got {text!r}")
    return vals[0], vals[1]


def _add_dist(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--nb", type=_nb_pair, metavar="R,P", help="negative binomial reference law")
    group.add_argument("--poisson", type=float, metavar="LAMBDA", help="Poisson reference law")
    parser.add_argument("--n", type=int, required=True, help="truncation level")


def _add_output(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("json", "csv"),
                        default=os.environ.get(FORMAT_ENV, "json"))
    parser.add_argument("--output", metavar="PATH", help="write here instead of stdout")


def _dist(args) -> DistParams:
    if args.nb is not None:
        return DistParams.negative_binomial(*args.nb)
    return DistParams.poisson(args.poisson)


def _check_n(n: int) -> None:
    if n < 0:
        raise UsageError(f"--n must be non-negative, got {n}")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def envelope(command: str, parameters: dict, results) -> dict:
    return {"command": command, "parameters": _clean(parameters), "results": _clean(results),
            "tool_version": __version__}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating))
                         else v for v in row])
    return buf.getvalue()


def cmd_factor(args):
    _check_n(args.n)
    params = _dist(args)
    parameters = {"dist": params.to_dict(), "n": args.n}
    if args.sweep_n is not None:
        bounds = monotonicity_sweep(params, args.sweep_n)
        exacts = [exact_G2(params, k).exact for k in range(args.sweep_n + 1)]
        rows = [(k, e, b) for k, (e, b) in enumerate(zip(exacts, bounds))]
        parameters["sweep_n"] = args.sweep_n
        return parameters, {"sweep": [dict(zip(("n", "exact", "bound"), r)) for r in rows]}, \
            (("n", "exact", "bound"), rows)
    report = exact_G2(params, args.n)
    results = report.to_dict()
    if args.brute_force:
        results["brute_force"] = brute_force_G2(params, args.n)
        results["brute_force_gap"] = abs(results["brute_force"] - report.exact)
    rows = [(i, s) for i, s in enumerate(report.per_state)]
    return parameters, results, (("i", "per_state"), rows)


def cmd_solve(args):
    _check_n(args.n)
    params = _dist(args)
    try:
        subset = [int(x) for x in args.set.split(",") if x.strip()]
        f = TestFunction.indicator(args.n, subset)
    except ValueError as exc:
        raise UsageError(f"--set: {exc}") from exc
    solver = solve_closed_form if args.method == "closed-form" else solve_forward
    sol = solver(params, args.n, f)
    resid = equation_residuals(params, args.n, f, sol)
    parameters = {"dist": params.to_dict(), "n": args.n, "set": subset, "method": args.method}
    results = sol.to_dict() | {"max_equation_residual": float(np.max(np.abs(resid)))}
    return parameters, results, (("i", "g"), list(enumerate(sol.g)))


def cmd_fault(args):
    if args.p_sweep:
        records = order_p_sweep(args.days, args.repair, args.p_sweep,
                                fault_day_repairs=not args.repair_after_fault)
        parameters = {"N": args.days, "R": args.repair, "p_sweep": args.p_sweep,
                      "fault_day_repairs": not args.repair_after_fault}
        results = {"sweep": [rec["comparison"].to_dict() | {
            "p": rec["p"], "bound_over_p": rec["bound_over_p"], "slope": rec["slope"]}
            for rec in records]}
        rows = [csv_row(FaultParams(args.days, args.repair, rec["p"]), rec["comparison"])
                + (rec["bound_over_p"], rec["slope"]) for rec in records]
        return parameters, results, (CSV_HEADER + ("bound_over_p", "slope"), rows)
    if args.prob is None:
        raise UsageError("fault needs --prob or --p-sweep")
    fp = FaultParams(args.days, args.repair, args.prob, not args.repair_after_fault)
    cmp = proposition_bounds(fp)
    parameters = {"N": fp.N, "R": fp.R, "p": fp.p, "fault_day_repairs": fp.fault_day_repairs}
    return parameters, cmp.to_dict(), (CSV_HEADER, [csv_row(fp, cmp)])


def cmd_limit(args):
    gaps_b = poisson_limit_check(args.lam, args.n, args.p_seq)
    gaps_e = poisson_limit_check(args.lam, args.n, args.p_seq, use_exact=True)
    rows = []
    for p, ge, gb in zip(args.p_seq, gaps_e, gaps_b):
        nb = DistParams.negative_binomial(args.lam / p, p)
        rep = exact_G2(nb, args.n)
        rows.append((p, rep.exact, rep.bound, ge, gb))
    header = ("p", "exact", "bound", "exact_gap", "bound_gap")
    parameters = {"lambda": args.lam, "n": args.n, "p_seq": args.p_seq,
                  "poisson_bound": exact_G2(DistParams.poisson(args.lam), args.n).bound}
    return parameters, {"sweep": [dict(zip(header, r)) for r in rows]}, (header, rows)


def cmd_simulate(args):
    _check_n(args.n)
    params = _dist(args)
    parameters = {"dist": params.to_dict(), "n": args.n, "seed": args.seed}
    if args.stationary:
        config = SimConfig(params, args.n, args.start, horizon=args.horizon, seed=args.seed)
        emp = empirical_stationary(config)
        tv = tv_distance(emp, truncate(params, args.n))
        parameters |= {"mode": "stationary", "horizon": args.horizon, "initial_state": args.start}
        return parameters, {"pmf": emp.to_dict(), "tv_to_truncated": tv}, \
            (("k", "prob"), emp.to_csv_rows())
    if args.tau01:
        if args.n == 0:
            raise UsageError("n = 0 leaves the chain absorbed at 0; there is no first transition")
        config = SimConfig(params, args.n, 0, event_cap=1, seed=args.seed, replications=args.reps)
        est = mean_first_transition_from_zero(config)
        sharp = sharp_value_estimate(est, params, args.n)
        parameters |= {"mode": "tau01", "replications": args.reps}
        results = {"tau01": est.to_dict(args.seed), "analytic_tau01": 1.0 / params.rate_at_zero,
                   "sharp_value": sharp.to_dict(args.seed),
                   "factor_bound": exact_G2(params, args.n).bound}
        return parameters, results, (("quantity", "point", "std_error", "analytic"), [
            ("tau01", est.point, est.std_error, 1.0 / params.rate_at_zero),
            ("sharp_value", sharp.point, sharp.std_error, results["factor_bound"])])
    if args.h_diff is not None:
        try:
            subset = [int(x) for x in args.set.split(",") if x.strip()]
            f = TestFunction.indicator(args.n, subset)
        except ValueError as exc:
            raise UsageError(f"--set: {exc}") from exc
        i = args.h_diff
        if not 0 <= i <= args.n:
            raise UsageError(f"--h-diff state must lie in 0..{args.n}")
        config = SimConfig(params, args.n, i, horizon=args.horizon, seed=args.seed,
                           replications=args.reps)
        est = estimate_h_difference(config, f, i)
        exact = (solve_forward(params, args.n, f).g[i + 1] if i < args.n
                 else generator_h_difference(params, args.n, f))
        parameters |= {"mode": "h_diff", "set": subset, "state": i, "horizon": args.horizon,
                       "replications": args.reps}
        return parameters, {"estimate": est.to_dict(args.seed), "exact": exact}, \
            (("state", "point", "std_error", "exact"), [(i, est.point, est.std_error, exact)])
    config = SimConfig(params, args.n, args.start, event_cap=args.events, seed=args.seed)
    path = simulate_path(config)
    parameters |= {"mode": "path", "events": args.events, "initial_state": args.start}
    return parameters, {"path": [{"t": t, "state": s} for t, s in path]}, (("t", "state"), path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truncstein",
                                     description="Stein factors for truncated NB/Poisson approximation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", help="exact Stein factor and its bound")
    _add_dist(p)
    p.add_argument("--brute-force", action="store_true", help="also enumerate every subset (n <= 20)")
    p.add_argument("--sweep-n", type=int, metavar="N_MAX", help="bound and exact factor for n = 0..N_MAX")
    _add_output(p)
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("solve", help="solve the Stein equation for an indicator")
    _add_dist(p)
    p.add_argument("--set", default="", help="comma-separated members of A")
    p.add_argument("--method", choices=("forward", "closed-form"), default="forward")
    _add_output(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("fault", help="machine fault example")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--repair", type=int, required=True)
    p.add_argument("--prob", type=float)
    p.add_argument("--p-sweep", type=_float_list, metavar="P1,P2,...")
    p.add_argument("--repair-after-fault", action="store_true",
                   help="repair occupies the R days after the fault day")
    _add_output(p)
    p.set_defaults(func=cmd_fault)

    p = sub.add_parser("limit", help="negative binomial to Poisson limit of the factor")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p-seq", type=_float_list, required=True, metavar="P1,P2,...")
    _add_output(p)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("simulate", help="birth-death chain simulation")
    _add_dist(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stationary", action="store_true")
    mode.add_argument("--tau01", action="store_true")
    mode.add_argument("--h-diff", type=int, metavar="I", help="estimate g(I+1) = h(I+1) - h(I)")
    mode.add_argument("--path", action="store_true")
    p.add_argument("--set", default="", help="test set A for --h-diff")
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--events", type=int, default=100)
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        parameters, results, (header, rows) = args.func(args)
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"truncstein {args.command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, UsageError) else 1
    if args.format == "csv":
        text = _csv_text(header, rows)
    else:
        text = json.dumps(envelope(args.command, parameters, results), indent=2) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
