"""Acceptance criteria, each run at its stated sample size and tolerance.

Every criterion prints one ``ACCEPTANCE <k> PASS|FAIL`` line. Run with
``pytest -v tests/test_acceptance.py`` or directly as a script.
"""

from __future__ import annotations

import sys
import time

import numpy as np
import pytest

from gaussbandit import harness, surrogate, verification
from gaussbandit import environments as envs

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SEED = 20241015
STABILITY_SEED = 1000
REGRET_SEED = 2024
REPLICATIONS = 10
SLOPE_WINDOW = (2**10, 2**16)
SLOPE_RANGE = (0.4, 0.75)


def report(k: int, passed: bool, elapsed: float, detail: str) -> None:
    print(f"ACCEPTANCE {k} {'PASS' if passed else 'FAIL'} ({elapsed:.1f}s) {detail}", flush=True)


def boundary_environment(d: int):
    """Distance loss on ``r = 2d`` with the minimizer on the boundary of the ball around the origin."""
    r = 2.0 * d
    x_star = np.zeros(d)
    x_star[0] = r
    return envs.distance(x_star), envs.NoiseSpec("gaussian", 0.1), r


def experiment(d: int, n: int, algorithm: str, seed: int, **kw) -> harness.ExperimentConfig:
    loss, noise, r = boundary_environment(d)
    return harness.ExperimentConfig(
        loss=loss, noise=noise, radius=r, x_init=np.zeros(d), algorithm=algorithm,
        horizon=n, replications=REPLICATIONS, seed=seed, **kw,
    )


def criterion_1():
    n = verification.LEVELS["full"]["identity"]
    grid = verification.check_identity_grid(n, SEED)
    neg = verification.check_negative_control(n, SEED)
    failed = [o.name for o in grid if not o.passed]
    worst = max(o.detail["margin"] for o in grid)
    ok = not failed and neg[0].passed
    return ok, (f"{len(grid) - len(failed)}/{len(grid)} identity checks within 4 stderr "
                f"(worst {worst:.2f}); negative control margin {neg[0].detail['margin']:.1f} stderr"
                + (f"; failed: {failed}" if failed else ""))


def criterion_2():
    n = verification.LEVELS["full"]["bias"]
    out = verification.check_bias_grid(n, SEED)
    failed = [o.name for o in out if not o.passed]
    worst = max(o.detail["margin"] for o in out)
    return not failed, (f"{len(out) - len(failed)}/{len(out)} bias checks within 4 stderr (worst {worst:.2f})"
                        + (f"; failed: {failed}" if failed else ""))


def criterion_3():
    full = verification.LEVELS["full"]
    rows = verification.moment_margins(full["moments"], SEED, full["moment_cases"], "reference")
    bad = [r for r in rows if r[5] > verification.MOMENT_SIGMAS]
    bad_names = sorted({r[2] for r in bad})
    exact_rows = verification.moment_margins(full["moments"], SEED, full["moment_cases"], "exact")
    exact_worst = max(r[5] for r in exact_rows)

    cf2 = surrogate.gaussian_moment_oracle(np.eye(2))
    cf3 = surrogate.gaussian_moment_oracle(np.eye(3))
    identity_ok = cf2[1:] == (8.0, 6.0, 14.0) and cf3[1] == 15.0

    est, exact = surrogate.gaussian_square_mgf(2.0, full["mgf"], np.random.default_rng([SEED, 37]))
    mgf_rel = abs(float(est.value) - exact) / exact
    ok = not bad and identity_ok and mgf_rel <= 0.01
    detail = (f"reference closed forms vs MC: {len(rows) - len(bad)}/{len(rows)} within 5 stderr"
              f"{' (off: ' + ', '.join(bad_names) + ')' if bad else ''}; "
              f"exact forms worst {exact_worst:.2f} stderr; identity-case values {'ok' if identity_ok else 'WRONG'}; "
              f"mgf t=2 {float(est.value):.5f} vs {exact:.5f} (rel {mgf_rel:.2e})")
    return ok, detail


def criterion_4():
    out = verification.check_w2(SEED)
    return all(o.passed for o in out), "; ".join(f"{o.name}: {next(iter(o.detail.values())):.3g}" for o in out)


def criterion_5():
    n = 2**14
    parts = []
    ok = True
    for d in (2, 4, 8):
        prac = harness.run_experiment(experiment(d, n, "paper_practical", STABILITY_SEED))
        theo = harness.run_experiment(experiment(d, n, "paper_theoretical", STABILITY_SEED))
        pd = bool(np.all(prac.min_eig_sigma > 0) and np.all(np.isfinite(prac.trace_sigma_inv)))
        clip_frac = prac.clip_count[:, -1].max() / n
        trunc_frac = theo.trunc_count[:, -1].max() / n
        ok &= pd and clip_frac <= 1e-3 and trunc_frac < 1e-2
        parts.append(f"d={d}: PD={pd} max clip {clip_frac:.2%} max trunc {trunc_frac:.3%}")
    return ok, "; ".join(parts)


_REGRET_CACHE = {}


def regret_runs():
    if not _REGRET_CACHE:
        n = 2**16
        _REGRET_CACHE["search"] = harness.run_experiment(experiment(2, n, "paper_practical", REGRET_SEED))
        _REGRET_CACHE["one_point_gd"] = harness.run_experiment(experiment(2, n, "one_point_gd", REGRET_SEED))
        _REGRET_CACHE["random_search"] = harness.run_experiment(experiment(2, n, "random_search", REGRET_SEED))
    return _REGRET_CACHE


def criterion_6():
    traces = regret_runs()
    fit = harness.fit_regret_slope(traces["search"], SLOPE_WINDOW)
    med = {k: float(np.median(t.final_regret)) for k, t in traces.items()}
    ok = SLOPE_RANGE[0] <= fit.exponent <= SLOPE_RANGE[1] and med["search"] < med["one_point_gd"] and med["search"] < med["random_search"]
    return ok, (f"slope {fit.exponent:.3f} (r^2 {fit.r_squared:.4f}); median final regret "
                f"gaussian search {med['search']:.0f}, one_point_gd {med['one_point_gd']:.0f}, random_search {med['random_search']:.0f}")


def criterion_7():
    trace = regret_runs()["search"]
    n = trace.horizon
    jensen = trace.avg_iterate_error[:, -1] <= trace.final_regret / n + 1e-12
    keep = (trace.checkpoints >= SLOPE_WINDOW[0]) & (trace.checkpoints <= SLOPE_WINDOW[1])
    err = trace.avg_iterate_error[:, keep]
    monotone = np.all(np.diff(err, axis=1) < 0, axis=1)
    ok = bool(jensen.all()) and int(monotone.sum()) >= 8
    return ok, (f"convexity bound holds in {int(jensen.sum())}/{len(jensen)}; average-iterate error strictly "
                f"decreasing over t in [{SLOPE_WINDOW[0]}, {SLOPE_WINDOW[1]}] in {int(monotone.sum())}/{len(monotone)} seeds")


def criterion_8():
    cfg = experiment(2, 2**14, "paper_practical", REGRET_SEED)
    first = harness.trace_csv(harness.run_experiment(cfg))
    second = harness.trace_csv(harness.run_experiment(cfg))
    worst = 0.0
    for d in (2, 4, 8):
        dbg = harness.run_experiment(experiment(d, 2**14, "paper_practical", STABILITY_SEED, debug=True))
        worst = max(worst, float(dbg.residuals[:, 0].max()))
    ok = first == second and worst <= 1e-9
    return ok, f"CSV byte-identical: {first == second}; worst covariance-ratio residual {worst:.2e} (d=2,4,8)"


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
            5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8}


def run(k: int) -> bool:
    start = time.perf_counter()
    ok, detail = CRITERIA[k]()
    report(k, ok, time.perf_counter() - start, detail)
    return ok


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_acceptance(k, capsys):
    with capsys.disabled():
        print()
        ok = run(k)
    assert ok


if __name__ == "__main__":
    results = [run(k) for k in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
