"""Command-line front end: `simulate` (figure sweeps), `verify` (acceptance
suite), `optimize` (phase-shift design for one scenario).

Exit codes: 0 success, 1 configuration error, 2 acceptance failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np


def _default_threads():
    try:
        return max(1, int(os.environ.get("RISCF_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_simulate(args):
    from .experiments import SweepSpec, run_sweep

    spec = SweepSpec.from_json(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.mc_trials is not None:
        spec.mc_trials = args.mc_trials
    rows, path = run_sweep(spec, args.out, threads=args.threads)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_verify(args):
    from .experiments import verify

    report = verify(level=args.level, threads=args.threads,
                    out_json=args.out, csv_dir=args.csv_dir)
    if args.out:
        print(f"report written to {args.out}")
    return 0 if report["passed"] else 2


def _cmd_optimize(args):
    from . import channel, reform
    from .optimizer import Objective, OptimizeOptions, multistart
    from .scenario import load_scenario

    config, hwi, stats, extras = load_scenario(args.scenario)
    los = channel.build_los(stats, config)
    stacked, terms = reform.prepare(stats, los, hwi, config)
    kind = "sum_rate" if args.objective == "sum" else "smoothed_min"
    options = OptimizeOptions(max_iter=args.max_iter)
    best, reports = multistart(stacked, terms, config,
                               objective=Objective(kind, mu=config.mu),
                               options=options, n_starts=args.starts,
                               seed=args.seed)
    rates = reform.rate_reform(best.theta_star, stacked, terms, config)
    result = {
        "objective": args.objective,
        "objective_value": best.objective_value,
        "converged": best.converged,
        "iterations": best.iterations,
        "per_user_rates": rates.tolist(),
        "sum_rate": float(rates.sum()),
        "min_rate": float(rates.min()),
        "theta": best.theta_star.tolist(),
    }
    with open(args.out, "w") as fh:
        json.dump(result, fh, indent=1)
    if args.trajectory:
        np.savetxt(args.trajectory, np.asarray(best.trajectory),
                   header="objective", comments="")
    print(f"{kind}: {best.objective_value:.6f} "
          f"({'converged' if best.converged else 'max-iter'}, "
          f"{best.iterations} iterations) -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="riscf",
        description="Surface-assisted cell-free MIMO uplink rate toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a figure sweep")
    sim.add_argument("--spec", required=True, help="sweep spec JSON")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--mc-trials", type=int, default=None, dest="mc_trials")
    sim.add_argument("--threads", type=int, default=_default_threads())
    sim.set_defaults(func=_cmd_simulate)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--level", choices=("fast", "full"), default="fast")
    ver.add_argument("--out", default=None, help="write pass/fail JSON here")
    ver.add_argument("--csv-dir", default=None,
                     help="also emit small sweep CSVs for plotting")
    ver.add_argument("--threads", type=int, default=_default_threads())
    ver.set_defaults(func=_cmd_verify)

    opt = sub.add_parser("optimize", help="optimize phase shifts for a scenario")
    opt.add_argument("--scenario", required=True, help="scenario JSON")
    opt.add_argument("--objective", choices=("sum", "minrate"), required=True)
    opt.add_argument("--out", required=True, help="result JSON path")
    opt.add_argument("--starts", type=int, default=4)
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--max-iter", type=int, default=500, dest="max_iter")
    opt.add_argument("--trajectory", default=None,
                     help="dump the accepted-step objective trace as CSV")
    opt.set_defaults(func=_cmd_optimize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
