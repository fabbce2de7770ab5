"""Command-line entry point: ``gaussbandit {run,verify,slope}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, verification
from .errors import GaussBanditError


def _cmd_run(args) -> int:
    config = harness.load_config(args.config)
    if args.workers is not None:
        config.workers = args.workers
    out_dir = harness.resolve_output(config, args.out)
    start = time.perf_counter()
    trace = harness.run_experiment(config)
    paths = harness.emit_outputs(trace, config, out_dir)
    summary = trace.summary()
    fr = summary["final_regret"]
    print(f"{config.algorithm}: n={config.horizon} R={config.replications} "
          f"median final regret {fr['median']:.6g} (mean {fr['mean']:.6g})")
    slope = summary["slope"]
    if "exponent" in slope:
        print(f"slope over [{slope['from']}, {slope['to']}]: {slope['exponent']:.4f} (r^2 {slope['r_squared']:.4f})")
    print(f"truncations {summary['truncations_total']}  clips {summary['clips_total']}  "
          f"elapsed {time.perf_counter() - start:.1f}s")
    for p in paths.values():
        print(f"wrote {p}")
    return 0


def _cmd_verify(args) -> int:
    start = time.perf_counter()
    outcomes = verification.run_suite(args.level, args.seed)
    failed = [o for o in outcomes if not o.passed and not o.informational]
    for o in outcomes:
        if args.verbose or not o.passed or o.informational:
            print(o.line())
    n_checked = sum(not o.informational for o in outcomes)
    print(f"{n_checked - len(failed)}/{n_checked} checks passed "
          f"(level={args.level}, seed={args.seed}, {time.perf_counter() - start:.1f}s)")
    if args.out:
        report = {
            "level": args.level,
            "seed": args.seed,
            "passed": not failed,
            "outcomes": [
                {"name": o.name, "passed": bool(o.passed), "informational": o.informational,
                 "detail": {k: _jsonable(v) for k, v in o.detail.items()}}
                for o in outcomes
            ],
        }
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2) + "\n")
        print(f"wrote {path}")
    return 1 if failed else 0


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_jsonable(x) for x in v]
    return str(v)


def _cmd_slope(args) -> int:
    ts, reg = harness.read_csv(args.csv)
    agg = {"median": np.median, "mean": np.mean}[args.statistic]
    vals = agg(reg, axis=0)
    t1 = args.to if args.to is not None else int(ts[-1])
    keep = (ts >= args.from_) & (ts <= t1)
    fit = harness.fit_power_law(ts[keep], vals[keep])
    print(json.dumps({"exponent": fit.exponent, "intercept": fit.intercept, "r_squared": fit.r_squared,
                      "from": args.from_, "to": t1, "points": int(keep.sum()), "statistic": args.statistic}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussbandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a YAML config")
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", help=f"output directory (overrides ${harness.OUT_ENV_VAR} and the config)")
    p.add_argument("--workers", type=int, help="override the number of worker processes")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="Monte-Carlo verification of the estimator identities and oracles")
    p.add_argument("--level", choices=sorted(verification.LEVELS), default="fast")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write a JSON report here")
    p.add_argument("-v", "--verbose", action="store_true", help="print passing checks too")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("slope", help="fit the log-log regret slope from a regret CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--from", dest="from_", type=int, default=1)
    p.add_argument("--to", type=int)
    p.add_argument("--statistic", choices=("median", "mean"), default="median")
    p.set_defaults(func=_cmd_slope)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GaussBanditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
