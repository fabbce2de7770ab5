"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because ``GAUSSBANDIT_PURE_NUMPY``
is read at import time. Reports per-run wall time (after a warm-up run that
absorbs compilation) and the largest deviation between the two trajectories.

    python3 benchmarks/bench_kernels.py --dims 2 4 8 --horizon 4096
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
import gaussbandit as gb
from gaussbandit import environments as envs, runs

d, n, repeats, out = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3]), sys.argv[4]
x_star = np.zeros(d); x_star[0] = 2.0 * d
env = envs.Environment(envs.distance(x_star), envs.NoiseSpec("gaussian", 0.1))
params = gb.make_params(n, d, 2.0 * d, np.zeros(d))
t0 = time.perf_counter()
res = runs.run_gaussian_search(env, params, seed=11)
warm = time.perf_counter() - t0
times = []
for _ in range(repeats):
    t0 = time.perf_counter()
    res = runs.run_gaussian_search(env, params, seed=11)
    times.append(time.perf_counter() - t0)
base = runs.run_baseline(env, "one_point_gd", n, np.zeros(d), 2.0 * d, seed=11)
np.savez(out, xs=res.xs, trace_inv=res.trace_inv, base=base.xs)
print(json.dumps({"numba": gb.USING_NUMBA, "warmup": warm, "best": min(times)}))
"""


def run_backend(pure: bool, d: int, n: int, repeats: int, path: str) -> dict:
    env = dict(os.environ)
    env["GAUSSBANDIT_PURE_NUMPY"] = "1" if pure else "0"
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(d), str(n), str(repeats), path],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, nargs="+", default=[2, 4, 8])
    parser.add_argument("--horizon", type=int, default=4096)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"{'d':>3} {'numba_s':>10} {'numpy_s':>10} {'speedup':>8} {'max_dev_xs':>11} {'max_dev_base':>12}")
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        for d in args.dims:
            fast_path = os.path.join(tmp, f"nb{d}.npz")
            slow_path = os.path.join(tmp, f"np{d}.npz")
            fast = run_backend(False, d, args.horizon, args.repeats, fast_path)
            slow = run_backend(True, d, args.horizon, args.repeats, slow_path)
            a, b = np.load(fast_path), np.load(slow_path)
            dev = float(np.max(np.abs(a["xs"] - b["xs"])))
            dev_base = float(np.max(np.abs(a["base"] - b["base"])))
            print(f"{d:>3} {fast['best']:>10.4f} {slow['best']:>10.4f} "
                  f"{slow['best'] / fast['best']:>8.1f} {dev:>11.3e} {dev_base:>12.3e}")
    print(f"horizon={args.horizon} repeats={args.repeats} total_sec={time.perf_counter() - start:.1f}")


if __name__ == "__main__":
    main()
