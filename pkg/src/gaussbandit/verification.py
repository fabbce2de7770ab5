"""Monte-Carlo verification suite behind ``gaussbandit verify``.

Each ``check_*`` function returns a list of ``Outcome`` rows. ``LEVELS``
fixes the sample sizes; ``full`` is the size used by the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import environments as envs
from . import linalg, surrogate

LEVELS = {
    "fast": {"identity": 20_000, "bias": 20_000, "moments": 50_000, "mgf": 1_000_000, "moment_cases": 5},
    "full": {"identity": 1_000_000, "bias": 1_000_000, "moments": 1_000_000, "mgf": 10_000_000, "moment_cases": 20},
}
GRID_DIMS = (1, 2, 3)
GRID_LAMBDAS = (0.25, 0.5)
GRID_LOSSES = ("distance", "max_affine", "huberized_quadratic")
MOMENT_SIGMAS = 5.0


@dataclass
class Outcome:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    informational: bool = False

    def line(self) -> str:
        tag = "INFO" if self.informational else ("PASS" if self.passed else "FAIL")
        extras = " ".join(f"{k}={_short(v)}" for k, v in self.detail.items())
        return f"[{tag}] {self.name} {extras}".rstrip()


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def grid_loss(kind: str, d: int) -> envs.LossSpec:
    """Grid losses are centred at the origin."""
    origin = np.zeros(d)
    if kind == "distance":
        return envs.distance(origin)
    if kind == "max_affine":
        return envs.skewed_polytope(origin)
    if kind == "huberized_quadratic":
        return envs.huberized_quadratic(origin, curvature=1.0)
    raise ValueError(kind)


def grid_cases(seed: int):
    """``(name, loss, mu, Sigma, lam)`` over losses x dims x lambdas; means and covariances from ``seed``."""
    rng = np.random.default_rng([seed, 7])
    cases = []
    for d in GRID_DIMS:
        for kind in GRID_LOSSES:
            for lam in GRID_LAMBDAS:
                mu = 0.5 * rng.standard_normal(d)
                sigma = linalg.random_spd(rng, d, cond=4.0, scale=0.5)
                cases.append((f"{kind}/d={d}/lam={lam:g}", grid_loss(kind, d), mu, sigma, lam))
    return cases


def check_identity_grid(n_samples: int, seed: int) -> list:
    out = []
    for i, (name, loss, mu, sigma, lam) in enumerate(grid_cases(seed)):
        spec = surrogate.SurrogateSpec.build(loss, mu, sigma, lam)
        rep = surrogate.check_identities(spec, n_samples, np.random.default_rng([seed, 11, i]))
        for c in rep.checks:
            out.append(Outcome(f"identity/{c.name}/{name}", c.passed, {"margin": c.margin}))
    return out


def check_negative_control(n_samples: int, seed: int) -> list:
    """The Stein-type identity must fail when ``Z`` is drawn with variance factor 1."""
    loss = envs.distance(np.zeros(2))
    spec = surrogate.SurrogateSpec.build(loss, np.zeros(2), np.diag([1.0, 4.0]), 0.25)
    rep = surrogate.check_identities(spec, n_samples, np.random.default_rng([seed, 13]), z_beta_sq=1.0)
    c = rep["stein"]
    return [Outcome("negative-control/stein-fails-with-beta_sq=1", not c.passed, {"margin": c.margin})]


def check_bias_grid(n_samples: int, seed: int) -> list:
    out = []
    noise = envs.NoiseSpec("gaussian", 0.1)
    for i, (name, loss, mu, sigma, lam) in enumerate(grid_cases(seed)):
        rep = surrogate.estimator_bias_probe(
            mu, sigma, lam, loss, n_samples, np.random.default_rng([seed, 17, i]), y_baseline=1.0, noise=noise
        )
        for c in rep.checks:
            out.append(Outcome(f"bias/{c.name}/{name}", c.passed, {"margin": c.margin}))
    # affine loss: E[g] = c and E[H] = 0
    c_vec = np.array([0.6, -0.8])
    loss = envs.affine(c_vec, offset=0.3)
    rng = np.random.default_rng([seed, 19])
    sigma = np.array([[1.0, 0.3], [0.3, 2.0]])
    rep = surrogate.estimator_bias_probe(np.array([0.2, -0.1]), sigma, 0.5, loss, n_samples, rng)
    g = rep["grad"].lhs
    h = rep["hess"].lhs
    g_margin = float(np.max(np.abs(g.value - c_vec) / g.stderr))
    h_margin = float(np.max(np.abs(h.value) / h.stderr))
    out.append(Outcome("bias/affine/E[g]=c", g_margin <= 4.0, {"margin": g_margin}))
    out.append(Outcome("bias/affine/E[H]=0", h_margin <= 4.0, {"margin": h_margin}))
    return out


def moment_cases(seed: int, count: int):
    rng = np.random.default_rng([seed, 23])
    cases = []
    for _ in range(count):
        d = int(rng.integers(1, 9))
        a = linalg.random_spd(rng, d, cond=float(rng.uniform(1.0, 20.0)), scale=float(rng.uniform(0.2, 2.0)))
        mu = rng.standard_normal(d)
        cases.append((a, mu))
    return cases


MOMENT_NAMES = ("E|W|_A^2", "E|W|_A^4", "E tr(A(WW'-I)A(WW'-I))", "E tr(A(WW'-I)^2 A)")
NORM_NAMES = ("E|Z|^2", "E|Z|^4")


def moment_margins(n_samples: int, seed: int, count: int, closed_form: str = "reference") -> list:
    """Per input, ``|MC - closed form| / stderr`` for the four matrix moments and the two norm moments.

    ``closed_form`` selects ``reference`` (``gaussian_moment_oracle``,
    ``gaussian_norm_moments``) or ``exact``.
    """
    mat = surrogate.gaussian_moment_oracle if closed_form == "reference" else surrogate.gaussian_moment_exact
    nrm = surrogate.gaussian_norm_moments if closed_form == "reference" else surrogate.gaussian_norm_moments_exact
    rows = []
    for i, (a, mu) in enumerate(moment_cases(seed, count)):
        mc = surrogate.mc_gaussian_moments(a, n_samples, np.random.default_rng([seed, 29, i]))
        cf = mat(a)
        for name, est, val in zip(MOMENT_NAMES, mc, cf):
            rows.append((i, a.shape[0], name, float(est.value), val, abs(float(est.value) - val) / float(est.stderr)))
        mc = surrogate.mc_norm_moments(mu, a, n_samples, np.random.default_rng([seed, 31, i]))
        cf = nrm(mu, a)
        for name, est, val in zip(NORM_NAMES, mc, cf):
            rows.append((i, a.shape[0], name, float(est.value), val, abs(float(est.value) - val) / float(est.stderr)))
    return rows


def check_moments(n_samples: int, seed: int, count: int) -> list:
    out = []
    for form in ("exact", "reference"):
        rows = moment_margins(n_samples, seed, count, form)
        for name in MOMENT_NAMES + NORM_NAMES:
            sel = [r for r in rows if r[2] == name]
            worst = max(r[5] for r in sel)
            out.append(Outcome(
                f"moments/{form}/{name}", worst <= MOMENT_SIGMAS,
                {"worst_sigmas": worst, "cases": len(sel)},
                informational=(form == "reference"),
            ))
    cf = surrogate.gaussian_moment_oracle(np.eye(2))
    e2, e4 = surrogate.gaussian_norm_moments(np.zeros(2), np.eye(2))
    cf3 = surrogate.gaussian_moment_oracle(np.eye(3))
    ok = cf[1] == 8 and cf[2] == 6 and cf[3] == 14 and cf3[1] == 15 and e2 == 2 and e4 == 8
    out.append(Outcome("moments/reference-identity-values", ok, {"d2": cf[1:], "d3_m4": cf3[1]}))
    return out


def check_mgf(n_samples: int, seed: int) -> list:
    est, exact = surrogate.gaussian_square_mgf(2.0, n_samples, np.random.default_rng([seed, 37]))
    rel = abs(float(est.value) - exact) / exact
    return [Outcome("subgaussian-mgf/t=2", rel <= 0.01, {"estimate": float(est.value), "exact": exact, "rel_err": rel})]


def check_w2(seed: int) -> list:
    rng = np.random.default_rng([seed, 41])
    out = []
    f1 = linalg.sym_eig(np.array([[1.0]]))
    f2 = linalg.sym_eig(np.array([[4.0]]))
    v = linalg.wasserstein2_gaussian([0.0], f1, [3.0], f2)
    out.append(Outcome("w2/scalar-case", abs(v - np.sqrt(10.0)) <= 1e-10, {"value": v}))
    worst_self = 0.0
    worst_sym = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 9))
        fa = linalg.sym_eig(linalg.random_spd(rng, d, cond=50.0))
        fb = linalg.sym_eig(linalg.random_spd(rng, d, cond=50.0))
        ma, mb = rng.standard_normal(d), rng.standard_normal(d)
        worst_self = max(worst_self, linalg.wasserstein2_gaussian(ma, fa, ma, fa))
        worst_sym = max(worst_sym, abs(linalg.wasserstein2_gaussian(ma, fa, mb, fb) - linalg.wasserstein2_gaussian(mb, fb, ma, fa)))
    out.append(Outcome("w2/identical-is-zero", worst_self <= 1e-12, {"worst": worst_self}))
    out.append(Outcome("w2/symmetric", worst_sym <= 1e-12, {"worst": worst_sym}))
    return out


def run_suite(level: str = "fast", seed: int = 0) -> list:
    sizes = LEVELS[level]
    out = []
    out += check_w2(seed)
    out += check_moments(sizes["moments"], seed, sizes["moment_cases"])
    out += check_mgf(sizes["mgf"], seed)
    out += check_identity_grid(sizes["identity"], seed)
    out += check_negative_control(sizes["identity"], seed)
    out += check_bias_grid(sizes["bias"], seed)
    return out
