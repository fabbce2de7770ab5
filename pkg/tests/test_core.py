import math

import numpy as np
import pytest

from gaussbandit import core, kernels, linalg, runs
from gaussbandit import environments as envs
from gaussbandit.errors import InvalidHorizon, InvalidRadius, NonFinite, StateMismatch


def test_practical_params():
    p = core.make_params(10_000, 4, 4.0)
    assert p.eta == pytest.approx(0.01) and p.lam == 0.25
    assert math.isinf(p.w_max) and math.isinf(p.d_max)


def test_lambda_cap():
    p = core.make_params(4, 1, 1.0)
    assert p.eta == pytest.approx(0.25) and p.lam == 0.99


def test_theoretical_params_small():
    p = core.make_params(2, 2, 2.0, mode="theoretical")
    assert p.log_p == pytest.approx(math.log(2))
    assert p.f_max == pytest.approx(4 * math.log(2) ** 3)
    assert p.f_max == pytest.approx(1.3321, abs=1e-4)
    assert 1 / math.sqrt(p.f_max * p.log_p) == pytest.approx(1.0407, abs=1e-4)
    assert p.lam == 0.99
    assert p.w_max == pytest.approx(math.sqrt(2 * math.log(2)))
    assert p.d_max == pytest.approx(2 * math.sqrt(math.log(2)))


def test_sigma_max_inv():
    assert core.make_params(100, 2, 2.0).sigma_max_inv == 27_040_000


def test_param_rejections():
    with pytest.raises(InvalidHorizon):
        core.make_params(1, 2, 2.0)
    with pytest.raises(InvalidRadius):
        core.make_params(10, 2, 0.5)
    with pytest.raises(StateMismatch):
        core.make_params(10, 2, 2.0, x_init=[0.0, 0.0, 0.0])


@pytest.mark.parametrize("d,r,x0,var", [(2, 4.0, [1.0, 1.0], 4.0), (1, 1.0, [0.0], 1.0), (3, 6.0, [0, 0, 0], 4.0)])
def test_init(d, r, x0, var):
    s = core.init(core.make_params(100, d, r, x0))
    assert np.array_equal(s.mu, x0)
    assert np.allclose(s.sigma, var * np.eye(d))
    assert np.allclose(s.precision.eigvals, 1 / var)


def test_propose_whitening():
    s = core.init(core.make_params(100, 3, 3.0))
    assert np.allclose(core.propose(s, np.random.default_rng(1)) - s.mu, np.random.default_rng(1).standard_normal(3))


def test_propose_moments():
    s = core.GaussianSearchState(t=1, mu=np.array([1.0, -1.0]), precision=linalg.sym_eig(np.diag([1.0, 0.25])))
    rng = np.random.default_rng(0)
    n = 1_000_000
    x = s.mu + rng.standard_normal((n, 2)) @ s.sigma_sqrt
    se = np.sqrt(np.diag(s.sigma) / n)
    assert np.all(np.abs(x.mean(0) - s.mu) <= 5 * se)
    c = np.cov(x.T)
    sd = x - s.mu
    se_cov = np.std(sd[:, :, None] * sd[:, None, :], axis=0) / np.sqrt(n)
    assert np.all(np.abs(c - np.diag([1.0, 4.0])) <= 5 * se_cov)


def _after_round_one(params, y0=1.0):
    s = core.init(params)
    s, _ = core.update(s, params, s.mu.copy(), y0)
    return s


def test_round_one_only_records():
    p = core.make_params(10, 2, 2.0)
    s0 = core.init(p)
    s1, rec = core.update(s0, p, np.array([0.3, 0.1]), 5.0)
    assert s1.t == 2 and s1.y_prev == 5.0 and rec.d_t == 0.0
    assert np.array_equal(s1.mu, s0.mu) and np.array_equal(s1.precision.source, s0.precision.source)


def test_zero_difference_changes_nothing():
    p = core.make_params(10, 2, 2.0)
    s = _after_round_one(p)
    s2, rec = core.update(s, p, np.array([0.4, -0.2]), 1.0)
    assert rec.d_t == 0.0 and rec.g_norm == 0.0
    assert np.array_equal(s2.mu, s.mu) and np.array_equal(s2.sigma, s.sigma)
    assert not rec.truncated


def test_scalar_update_by_hand():
    eta = 0.2
    p = core.make_params(100, 1, 1.0, lam=1.0, eta=eta)
    s = _after_round_one(p, y0=1.0)
    x = np.array([0.5])
    assert core.gradient_estimate(s, x, 0.2) == pytest.approx([0.1])
    assert core.hessian_estimate(s, p, x, 0.2) == pytest.approx(np.array([[-0.15]]))
    s2, rec = core.update(s, p, x, 1.2)
    assert rec.w_norm == pytest.approx(0.5) and rec.d_t == pytest.approx(0.2)
    assert s2.mu == pytest.approx([-0.1 * eta])
    assert s2.precision.source == pytest.approx(np.array([[1 - 0.0375 * eta]]))


def test_truncation_on_large_difference():
    p = core.make_params(100, 2, 2.0, mode="theoretical")
    s = _after_round_one(p, y0=0.0)
    s2, rec = core.update(s, p, np.array([0.1, 0.1]), p.d_max + 1.0)
    assert rec.truncated and s2.trunc_count == 1
    assert np.array_equal(s2.mu, s.mu) and np.array_equal(s2.sigma, s.sigma)
    assert s2.y_prev == p.d_max + 1.0 and s2.t == s.t + 1


def test_truncation_on_large_displacement():
    p = core.make_params(100, 2, 2.0, mode="theoretical")
    s = _after_round_one(p, y0=0.0)
    x = s.mu + s.sigma_sqrt @ np.array([p.w_max + 1.0, 0.0])
    _, rec = core.update(s, p, x, 0.01)
    assert rec.truncated


def test_hessian_skip_counts_clip():
    p = core.make_params(100, 1, 1.0, lam=1.0, eta=4.0)
    s = _after_round_one(p, y0=0.0)
    # H = D (w^2 - 1) = 3 * 8 = 24 on precision 1 with eta/4 = 1 -> fine; negative D makes it -24
    s2, rec = core.update(s, p, np.array([3.0]), -3.0)
    assert rec.hessian_skipped and s2.clip_count == 1
    assert np.array_equal(s2.sigma, s.sigma)
    assert s2.mu == pytest.approx(s.mu - 4.0 * -3.0 * 3.0)


def test_diagnostics_after_init():
    x0 = np.array([1.0, 2.0])
    p = core.make_params(100, 2, 4.0, x0)
    s = _after_round_one(p)
    ref = np.array([0.0, 0.0])
    _, rec = core.update(s, p, s.mu + 0.1, 1.0, x_ref=ref)
    assert rec.diag.cov_le_two_sigma1 and rec.diag.trace_inv_ok
    assert rec.diag.potential == pytest.approx(0.5 * x0 @ x0 * 4 / 16)
    _, rec = core.update(s, p, s.mu + 0.1, 1.0)
    assert rec.diag.potential == 0.0


def test_update_rejections():
    p = core.make_params(100, 2, 2.0)
    s = core.init(p)
    with pytest.raises(StateMismatch):
        core.update(s, p, np.zeros(3), 0.0)
    with pytest.raises(NonFinite):
        core.update(s, p, np.zeros(2), float("nan"))


def _step_api_run(env, params, seed):
    rng_search, rng_noise = runs.replication_streams(seed, 0)
    s = core.init(params)
    xs, clips, truncs = [], 0, 0
    for _ in range(params.n):
        x = core.propose(s, rng_search)
        y = envs.observe(env, x, rng_noise)
        s, rec = core.update(s, params, x, y, x_ref=env.minimizer)
        xs.append(x)
    return np.array(xs), s


@pytest.mark.parametrize("mode", ["practical", "theoretical"])
def test_kernel_matches_step_api(mode):
    env = envs.Environment(envs.distance([2.0, -1.0, 0.5]), envs.NoiseSpec("gaussian", 0.1))
    params = core.make_params(400, 3, 3.0, mode=mode)
    xs, state = _step_api_run(env, params, 17)
    res = runs.run_gaussian_search(env, params, 17)
    assert np.abs(res.xs - xs).max() <= 1e-10
    assert res.trace_inv[-1] == pytest.approx(np.trace(state.precision.source), rel=1e-10)
    assert int(res.clipped.sum()) == state.clip_count and int(res.truncated.sum()) == state.trunc_count


def test_compiled_kernel_matches_python_source():
    py = getattr(kernels.run_gaussian_search, "py_func", None)
    if py is None:
        pytest.skip("pure-numpy mode: no compiled kernel to compare")
    env = envs.Environment(envs.skewed_polytope([1.0, 1.0]), envs.NoiseSpec("uniform", 0.2))
    params = core.make_params(300, 2, 2.0)
    rng = np.random.default_rng(3)
    z, eps = rng.standard_normal((300, 2)), rng.uniform(-0.3, 0.3, 300)
    s = env.loss
    args = (z, eps, params.x_init, params.sigma1, params.eta, params.lam, params.w_max, params.d_max,
            params.sigma_max_inv, env.minimizer, s.code, s.center, s.directions, s.offsets, s.curvature, True)
    fast = kernels.run_gaussian_search(*args)
    slow = py(*args)
    for a, b in zip(fast[1:], slow[1:]):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_debug_identities_small():
    env = envs.Environment(envs.distance([2.0, 0.0]), envs.NoiseSpec("gaussian", 0.1))
    res = runs.run_gaussian_search(env, core.make_params(2000, 2, 2.0), 3, debug=True)
    assert np.all(res.residuals <= 1e-9)


def test_horizon_two_single_update():
    env = envs.Environment(envs.distance([1.0, 1.0]), envs.NoiseSpec("gaussian", 0.1))
    res = runs.run_gaussian_search(env, core.make_params(2, 2, 2.0), 0)
    assert res.d_t[0] == 0.0 and res.d_t[1] != 0.0
    assert res.trace_inv[0] == pytest.approx(2 / 1.0) and res.trace_inv[1] != res.trace_inv[0]


def test_run_determinism():
    env = envs.Environment(envs.distance([1.0, 1.0]), envs.NoiseSpec("gaussian", 0.1))
    p = core.make_params(500, 2, 2.0)
    a, b = runs.run_gaussian_search(env, p, 5, rep=2), runs.run_gaussian_search(env, p, 5, rep=2)
    assert np.array_equal(a.xs, b.xs)
    c = runs.run_gaussian_search(env, p, 5, rep=3)
    assert not np.array_equal(a.xs, c.xs)


def test_pure_numpy_fallback_matches(tmp_path):
    import os
    import subprocess
    import sys

    code = (
        "import numpy as np, sys, gaussbandit as gb\n"
        "from gaussbandit import runs, environments as envs\n"
        "assert not gb.USING_NUMBA\n"
        "env = envs.Environment(envs.distance([3.0, 1.0]), envs.NoiseSpec('gaussian', 0.1))\n"
        "res = runs.run_gaussian_search(env, gb.make_params(300, 2, 3.0), 21)\n"
        "np.save(sys.argv[1], res.xs)\n"
    )
    out = tmp_path / "xs.npy"
    env_vars = dict(os.environ, GAUSSBANDIT_PURE_NUMPY="1")
    subprocess.run([sys.executable, "-c", code, str(out)], env=env_vars, check=True)
    env = envs.Environment(envs.distance([3.0, 1.0]), envs.NoiseSpec("gaussian", 0.1))
    here = runs.run_gaussian_search(env, core.make_params(300, 2, 3.0), 21)
    assert np.abs(np.load(out) - here.xs).max() <= 1e-10
