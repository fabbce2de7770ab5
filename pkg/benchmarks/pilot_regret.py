"""Pilot runs used to fix the regret-shape thresholds.

Distance loss, d = 2, r = 4, x_init = 0, gaussian noise 0.1, n = 2^16,
10 replications of master seed 2024. Compares two minimizer placements
and several one-point step scales; prints a markdown table.

    python3 benchmarks/pilot_regret.py
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gaussbandit import harness
from gaussbandit import environments as envs


def config(x_star, algorithm, n, seed, reps, step_scale=None):
    return harness.ExperimentConfig(
        loss=envs.distance(x_star), noise=envs.NoiseSpec("gaussian", 0.1), radius=4.0,
        x_init=np.zeros(2), algorithm=algorithm, horizon=n, replications=reps, seed=seed,
        step_scale=step_scale,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=int, default=2**16)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--replications", type=int, default=10)
    args = parser.parse_args()

    start = time.perf_counter()
    print("| x* | algorithm | step_scale | median final regret | slope [2^10, n] | avg-iterate monotone |")
    print("|---|---|---|---|---|---|")
    for x_star in ([2.0, 0.0], [4.0, 0.0]):
        runs = [("paper_practical", None), ("random_search", None)]
        runs += [("one_point_gd", s) for s in (None, 0.5, 2.0)]
        for algorithm, scale in runs:
            trace = harness.run_experiment(config(x_star, algorithm, args.horizon, args.seed, args.replications, scale))
            fit = harness.fit_regret_slope(trace, (2**10, args.horizon))
            keep = trace.checkpoints >= 2**10
            mono = int(np.all(np.diff(trace.avg_iterate_error[:, keep], axis=1) < 0, axis=1).sum())
            label = "default (1/2d)" if algorithm == "one_point_gd" and scale is None else (scale or "")
            print(f"| {tuple(x_star)} | {algorithm} | {label} | {np.median(trace.final_regret):.0f} "
                  f"| {fit.exponent:.3f} | {mono}/{trace.replications} |")
    print(f"\nhorizon={args.horizon} seed={args.seed} replications={args.replications} "
          f"elapsed={time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
