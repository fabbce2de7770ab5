import numpy as np
import pytest
from scipy import integrate, stats

from gaussbandit import environments as envs
from gaussbandit import linalg, surrogate
from gaussbandit.errors import NotPositiveDefinite

N = 200_000


def _spec(loss, mu, sigma, lam):
    return surrogate.SurrogateSpec.build(loss, np.asarray(mu, float), np.asarray(sigma, float), lam)


def test_affine_value_is_exact():
    c = np.array([0.6, -0.8])
    spec = _spec(envs.affine(c, 0.5), [0.3, 0.1], np.diag([1.0, 2.0]), 0.5)
    z = np.array([1.0, -2.0])
    est = surrogate.surrogate_value(spec, z, N, np.random.default_rng(0))
    assert abs(est.value - (c @ z + 0.5)) <= 4 * est.stderr + 1e-12


def test_value_below_loss():
    spec = _spec(envs.distance([0.0, 0.0]), [0.0, 0.0], np.eye(2), 0.25)
    rng = np.random.default_rng(1)
    for z in rng.standard_normal((20, 2)):
        est = surrogate.surrogate_value(spec, z, 50_000, rng)
        assert est.value <= envs.loss_eval(spec.loss, z) + 4 * est.stderr


def test_value_matches_quadrature():
    spec = _spec(envs.distance([0.0]), [0.0], [[1.0]], 0.5)
    lam = 0.5
    integrand = lambda x: ((1 - 1 / lam) * abs(x) + abs((1 - lam) * x) / lam) * stats.norm.pdf(x)
    exact, _ = integrate.quad(integrand, -np.inf, np.inf)
    est = surrogate.surrogate_value(spec, [0.0], 1_000_000, np.random.default_rng(2))
    assert abs(est.value - exact) <= max(1e-4, 4 * float(est.stderr))


def test_affine_gradient():
    c = np.array([0.6, -0.8])
    spec = _spec(envs.affine(c), [0.3, 0.1], [[1.0, 0.2], [0.2, 0.5]], 0.25)
    est = surrogate.surrogate_grad(spec, np.array([0.5, 0.5]), N, np.random.default_rng(3))
    assert np.all(np.abs(est.value - c) <= 4 * est.stderr)


def test_symmetric_gradient_vanishes():
    spec = _spec(envs.distance([0.0]), [0.0], [[1.0]], 0.5)
    est = surrogate.surrogate_grad(spec, [0.0], N, np.random.default_rng(4))
    assert abs(est.value[0]) <= 4 * est.stderr[0]


def test_gradient_central_difference():
    spec = _spec(envs.huberized_quadratic([0.0, 0.0], 1.0), [0.2, -0.3], np.diag([0.5, 1.0]), 0.5)
    z, h = np.array([0.4, 0.1]), 1e-3
    grad = surrogate.surrogate_grad(spec, z, 400_000, np.random.default_rng(5))
    for j in range(2):
        e = np.eye(2)[j] * h
        # common random numbers keep the difference quotient's noise small
        gap = surrogate.mc_mean(
            lambda r, k: (
                lambda x: (envs.loss_eval(spec.loss, spec.mix(x, z + e)) - envs.loss_eval(spec.loss, spec.mix(x, z - e)))
                / (2 * h * spec.lam)
            )(spec.draw_x(r, k)[0]),
            400_000, np.random.default_rng(6),
        )
        tol = max(1e-2, 4 * np.hypot(float(gap.stderr), grad.stderr[j]))
        assert abs(float(gap.value) - grad.value[j]) <= tol


def test_affine_hessian_zero_and_symmetric():
    spec = _spec(envs.affine([0.6, 0.8]), [0.0, 1.0], [[1.0, 0.3], [0.3, 2.0]], 0.5)
    est = surrogate.surrogate_hess(spec, np.zeros(2), N, np.random.default_rng(7))
    assert np.all(np.abs(est.value) <= 4 * est.stderr)
    assert np.array_equal(est.value, est.value.T)


def test_hessian_norm_bound_huber():
    sigma = np.diag([0.5, 2.0])
    spec = _spec(envs.huberized_quadratic([0.0, 0.0], 1.0), [0.0, 0.0], sigma, 0.5)
    est = surrogate.surrogate_hess(spec, spec.mu, N, np.random.default_rng(8))
    bound = np.linalg.norm(linalg.sym_eig(sigma).inv_sqrt, 2)
    assert np.linalg.norm(est.value, 2) <= bound + 4 * np.abs(est.stderr).max()


def test_midpoint_convexity():
    spec = _spec(envs.skewed_polytope([0.0, 0.0]), [0.0, 0.0], np.eye(2), 0.25)
    est = surrogate.surrogate_midpoint_gap(spec, [1.0, -1.0], [-0.5, 2.0], N, np.random.default_rng(9))
    assert est.value <= 4 * est.stderr


def test_identities_affine():
    spec = _spec(envs.affine([0.0, 1.0]), [0.5, 0.5], [[2.0, 0.5], [0.5, 1.0]], 0.5)
    assert surrogate.check_identities(spec, N, np.random.default_rng(10)).passed


def test_identities_distance_reference_case():
    spec = _spec(envs.distance([0.0, 0.0]), [0.0, 0.0], np.diag([1.0, 4.0]), 0.25)
    rep = surrogate.check_identities(spec, N, np.random.default_rng(11))
    assert rep.passed, rep.summary()
    bad = surrogate.check_identities(spec, N, np.random.default_rng(12), z_beta_sq=1.0)
    assert not bad["stein"].passed


def test_bias_baseline_invariance():
    mu, sigma = np.array([0.2, -0.4]), np.diag([1.0, 0.5])
    loss = envs.distance([0.0, 0.0])
    noise = envs.NoiseSpec("gaussian", 0.1)
    a = surrogate.estimator_bias_probe(mu, sigma, 0.5, loss, N, np.random.default_rng(13), 0.0, noise)
    b = surrogate.estimator_bias_probe(mu, sigma, 0.5, loss, N, np.random.default_rng(13), 5.0, noise)
    assert a.passed and b.passed
    ga, gb = a["grad"].lhs, b["grad"].lhs
    assert np.all(np.abs(ga.value - gb.value) <= 4 * np.hypot(ga.stderr, gb.stderr))


def test_reference_moment_values():
    assert surrogate.gaussian_moment_oracle(np.eye(3))[:2] == (3.0, 15.0)
    assert surrogate.gaussian_moment_oracle(np.eye(2))[2:] == (6.0, 14.0)
    m2, m4, _, _ = surrogate.gaussian_moment_oracle(np.diag([1.0, 4.0]))
    assert (m2, m4) == (5.0, 59.0)
    assert surrogate.gaussian_norm_moments([0.0, 0.0], np.eye(2)) == (2.0, 8.0)
    e2, e4 = surrogate.gaussian_norm_moments([3.0, 0.0], np.eye(2))
    assert (e2, e4) == (11.0, 134.0) and e4 <= 3 * e2**2


def test_exact_moment_values():
    # E tr(A (WW'-I)^2 A) = (d + 1) tr(A^2); E|Z|^4 has 4 |mu|_S^2
    assert surrogate.gaussian_moment_exact(np.eye(2))[3] == 6.0
    assert surrogate.gaussian_norm_moments_exact([3.0, 0.0], np.eye(2)) == (11.0, 161.0)
    assert surrogate.gaussian_moment_exact(np.eye(1)) == surrogate.gaussian_moment_oracle(np.eye(1))


def test_exact_moments_match_mc():
    rng = np.random.default_rng(14)
    a = linalg.random_spd(rng, 4, cond=5.0)
    mc = surrogate.mc_gaussian_moments(a, 400_000, rng)
    for est, val in zip(mc, surrogate.gaussian_moment_exact(a)):
        assert abs(float(est.value) - val) <= 5 * float(est.stderr)
    mu = rng.standard_normal(4)
    mc = surrogate.mc_norm_moments(mu, a, 400_000, rng)
    for est, val in zip(mc, surrogate.gaussian_norm_moments_exact(mu, a)):
        assert abs(float(est.value) - val) <= 5 * float(est.stderr)


def test_moment_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        surrogate.gaussian_moment_oracle(np.diag([1.0, -1.0]))


def test_square_mgf_light():
    est, exact = surrogate.gaussian_square_mgf(3.0, 400_000, np.random.default_rng(15))
    assert exact == pytest.approx(1 / np.sqrt(1 - 2 / 9))
    assert abs(float(est.value) - exact) <= 5 * float(est.stderr)
    with pytest.raises(ValueError):
        surrogate.gaussian_square_mgf(1.0, 10, np.random.default_rng(0))


def test_mc_mean_chunk_invariance():
    f = lambda r, k: r.standard_normal((k, 2))
    a = surrogate.mc_mean(f, 10_000, np.random.default_rng(0), chunk=10_000)
    b = surrogate.mc_mean(f, 10_000, np.random.default_rng(0), chunk=10_000)
    assert np.array_equal(a.value, b.value)
    c = surrogate.mc_mean(f, 10_000, np.random.default_rng(0), chunk=999)
    assert np.allclose(a.value, c.value, atol=1e-12) and np.allclose(a.stderr, c.stderr, rtol=1e-9)
