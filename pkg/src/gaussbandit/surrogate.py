"""Monte-Carlo oracles for the surrogate loss and Gaussian moment identities.

For ``p = N(mu, Sigma)`` and ``lam`` in (0, 1) the surrogate is

    s(z) = E_p[(1 - 1/lam) f(X) + (1/lam) f((1 - lam) X + lam z)]

and ``Z ~ N(mu, beta_sq Sigma)`` with ``beta_sq = (2 - lam) / lam`` makes
``(1 - lam) X + lam Z`` distributed as ``X``. Every estimator here is a
plain sample mean over independent draws; two-sided comparisons use
independent streams for the two sides so that their standard errors add in
quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .environments import LossSpec, NoiseSpec, loss_eval
from .errors import NotPositiveDefinite

CHUNK = 1 << 16
IDENTITY_SIGMAS = 4.0


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with per-entry standard error."""

    value: np.ndarray
    stderr: np.ndarray
    samples: int

    @property
    def max_stderr(self) -> float:
        return float(np.max(self.stderr))

    def __float__(self):
        return float(self.value)


class _Moments:
    """Running mean and sum of squared deviations, merged chunk by chunk (Chan et al.)."""

    def __init__(self):
        self.n = 0
        self.mean = None
        self.m2 = None

    def add(self, batch: np.ndarray):
        k = batch.shape[0]
        bmean = batch.mean(axis=0)
        bm2 = ((batch - bmean) ** 2).sum(axis=0)
        if self.n == 0:
            self.n, self.mean, self.m2 = k, bmean, bm2
            return
        tot = self.n + k
        delta = bmean - self.mean
        self.mean = self.mean + delta * (k / tot)
        self.m2 = self.m2 + bm2 + delta**2 * (self.n * k / tot)
        self.n = tot

    def estimate(self) -> McEstimate:
        var = self.m2 / max(self.n - 1, 1)
        return McEstimate(np.asarray(self.mean), np.sqrt(var / self.n), self.n)


def mc_mean(sample_fn, n_samples: int, rng: np.random.Generator, chunk: int = CHUNK) -> McEstimate:
    """Average ``sample_fn(rng, k)`` (returning ``k`` rows) over ``n_samples`` draws in fixed chunks."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    acc = _Moments()
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        acc.add(np.asarray(sample_fn(rng, k), dtype=float))
        done += k
    return acc.estimate()


@dataclass(frozen=True)
class SurrogateSpec:
    loss: LossSpec
    mu: np.ndarray
    sigma: linalg.PsdFactorization
    lam: float

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError("lambda must lie strictly inside (0, 1)")
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float).reshape(-1))

    @classmethod
    def build(cls, loss: LossSpec, mu, sigma, lam: float) -> "SurrogateSpec":
        f = sigma if isinstance(sigma, linalg.PsdFactorization) else linalg.sym_eig(sigma)
        return cls(loss, mu, f, float(lam))

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def beta_sq(self) -> float:
        return (2.0 - self.lam) / self.lam

    def draw_x(self, rng, k):
        """``(X, G)`` with ``X = mu + Sigma^{1/2} G`` and ``G`` standard normal."""
        g = rng.standard_normal((k, self.d))
        return self.mu + g @ self.sigma.sqrt, g

    def draw_z(self, rng, k, beta_sq=None):
        b = self.beta_sq if beta_sq is None else beta_sq
        g = rng.standard_normal((k, self.d))
        return self.mu + np.sqrt(b) * (g @ self.sigma.sqrt)

    def mix(self, x, z):
        return (1.0 - self.lam) * x + self.lam * z

    def whitened_outer(self, g):
        """Rows of ``Sigma^{-1}((X-mu)(X-mu)^T Sigma^{-1} - I)`` flattened to ``d*d``."""
        r = self.sigma.inv_sqrt
        u = g @ r  # Sigma^{-1}(X - mu) = Sigma^{-1/2} G
        m = u[:, :, None] * u[:, None, :] - self.sigma.inv[None, :, :]
        return m.reshape(g.shape[0], -1)


def _f(spec: SurrogateSpec, pts):
    return loss_eval(spec.loss, pts)


def _sym_estimate(est: McEstimate, d: int) -> McEstimate:
    v = est.value.reshape(d, d)
    s = est.stderr.reshape(d, d)
    return McEstimate(0.5 * (v + v.T), 0.5 * (s + s.T), est.samples)


# -- surrogate and its derivatives --------------------------------------------


def surrogate_value(spec: SurrogateSpec, z, n_samples: int, rng) -> McEstimate:
    z = np.asarray(z, dtype=float)

    def sample(r, k):
        x, _ = spec.draw_x(r, k)
        return (1.0 - 1.0 / spec.lam) * _f(spec, x) + _f(spec, spec.mix(x, z)) / spec.lam

    return mc_mean(sample, n_samples, rng)


def surrogate_grad(spec: SurrogateSpec, z, n_samples: int, rng) -> McEstimate:
    """``E[f((1-lam) X + lam z) Sigma^{-1}(X - mu)] / (1 - lam)``."""
    z = np.asarray(z, dtype=float)
    r_inv = spec.sigma.inv_sqrt

    def sample(r, k):
        x, g = spec.draw_x(r, k)
        return (_f(spec, spec.mix(x, z)) / (1.0 - spec.lam))[:, None] * (g @ r_inv)

    return mc_mean(sample, n_samples, rng)


def surrogate_hess(spec: SurrogateSpec, z, n_samples: int, rng) -> McEstimate:
    """``lam/(1-lam)^2 E[f((1-lam) X + lam z) Sigma^{-1}((X-mu)(X-mu)^T Sigma^{-1} - I)]``, symmetrized."""
    z = np.asarray(z, dtype=float)
    scale = spec.lam / (1.0 - spec.lam) ** 2

    def sample(r, k):
        x, g = spec.draw_x(r, k)
        return (scale * _f(spec, spec.mix(x, z)))[:, None] * spec.whitened_outer(g)

    return _sym_estimate(mc_mean(sample, n_samples, rng), spec.d)


def surrogate_midpoint_gap(spec: SurrogateSpec, z1, z2, n_samples: int, rng) -> McEstimate:
    """``s((z1+z2)/2) - (s(z1) + s(z2))/2`` with common random numbers (<= 0 up to MC error)."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    zm = 0.5 * (z1 + z2)

    def sample(r, k):
        x, _ = spec.draw_x(r, k)
        # the (1 - 1/lam) f(X) terms cancel exactly in the combination
        return (_f(spec, spec.mix(x, zm)) - 0.5 * (_f(spec, spec.mix(x, z1)) + _f(spec, spec.mix(x, z2)))) / spec.lam

    return mc_mean(sample, n_samples, rng)


# -- identity checks -----------------------------------------------------------


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: McEstimate
    rhs: McEstimate
    sigmas: float = IDENTITY_SIGMAS

    @property
    def diff(self) -> np.ndarray:
        return np.asarray(self.lhs.value - self.rhs.value)

    @property
    def combined_stderr(self) -> np.ndarray:
        return np.sqrt(self.lhs.stderr**2 + self.rhs.stderr**2)

    @property
    def margin(self) -> float:
        """Worst-entry ``|LHS - RHS|`` in units of combined standard error."""
        se = np.maximum(self.combined_stderr, 1e-300)
        return float(np.max(np.abs(self.diff) / se))

    @property
    def passed(self) -> bool:
        return bool(np.all(np.abs(self.diff) <= self.sigmas * self.combined_stderr))

    def summary(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin,
                "max_abs_diff": float(np.max(np.abs(self.diff))),
                "max_combined_stderr": float(np.max(self.combined_stderr))}


@dataclass
class IdentityReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> IdentityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> list:
        return [c.summary() for c in self.checks]


def check_identities(spec: SurrogateSpec, n_samples: int, rng: np.random.Generator, z_beta_sq: float | None = None) -> IdentityReport:
    """Two-sided checks of the four surrogate expectation identities.

    * ``mean``:    E[s(Z)] = E[f(X)]
    * ``grad``:    E[grad s(Z)] = E[f(X) Sigma^{-1}(X - mu)]
    * ``hess``:    E[hess s(Z)] = lam E[f(X) Sigma^{-1}((X-mu)(X-mu)^T Sigma^{-1} - I)]
    * ``stein``:   E[<grad s(Z), Z - mu>] = beta_sq E[tr(Sigma hess s(Z))]

    Each side is estimated from its own child stream of ``rng``. The inner
    expectations defining ``s`` and its derivatives are merged with the
    outer one (one ``X`` per ``Z``). ``z_beta_sq`` replaces the variance
    factor of the law of ``Z`` while the formulas keep
    ``beta_sq = (2 - lam)/lam``; it exists for negative controls.
    """
    lam = spec.lam
    d = spec.d
    b_law = spec.beta_sq if z_beta_sq is None else float(z_beta_sq)
    r_inv = spec.sigma.inv_sqrt
    hscale = lam / (1.0 - lam) ** 2
    streams = rng.spawn(8)

    def lhs_mean(r, k):
        x, _ = spec.draw_x(r, k)
        z = spec.draw_z(r, k, b_law)
        return (1.0 - 1.0 / lam) * _f(spec, x) + _f(spec, spec.mix(x, z)) / lam

    def rhs_mean(r, k):
        x, _ = spec.draw_x(r, k)
        return _f(spec, x)

    def lhs_grad(r, k):
        x, g = spec.draw_x(r, k)
        z = spec.draw_z(r, k, b_law)
        return (_f(spec, spec.mix(x, z)) / (1.0 - lam))[:, None] * (g @ r_inv)

    def rhs_grad(r, k):
        x, g = spec.draw_x(r, k)
        return _f(spec, x)[:, None] * (g @ r_inv)

    def lhs_hess(r, k):
        x, g = spec.draw_x(r, k)
        z = spec.draw_z(r, k, b_law)
        return (hscale * _f(spec, spec.mix(x, z)))[:, None] * spec.whitened_outer(g)

    def rhs_hess(r, k):
        x, g = spec.draw_x(r, k)
        return (lam * _f(spec, x))[:, None] * spec.whitened_outer(g)

    def lhs_stein(r, k):
        x, g = spec.draw_x(r, k)
        z = spec.draw_z(r, k, b_law)
        proj = np.einsum("ij,ij->i", g @ r_inv, z - spec.mu)
        return _f(spec, spec.mix(x, z)) / (1.0 - lam) * proj

    def rhs_stein(r, k):
        x, g = spec.draw_x(r, k)
        z = spec.draw_z(r, k, b_law)
        # tr(Sigma Sigma^{-1}((X-mu)(X-mu)^T Sigma^{-1} - I)) = |G|^2 - d
        return spec.beta_sq * hscale * _f(spec, spec.mix(x, z)) * (np.sum(g * g, axis=1) - d)

    report = IdentityReport()
    pairs = [("mean", lhs_mean, rhs_mean), ("grad", lhs_grad, rhs_grad),
             ("hess", lhs_hess, rhs_hess), ("stein", lhs_stein, rhs_stein)]
    for i, (name, lf, rf) in enumerate(pairs):
        lhs = mc_mean(lf, n_samples, streams[2 * i])
        rhs = mc_mean(rf, n_samples, streams[2 * i + 1])
        if name == "hess":
            lhs, rhs = _sym_estimate(lhs, d), _sym_estimate(rhs, d)
        report.checks.append(IdentityCheck(name, lhs, rhs))
    return report


def estimator_bias_probe(
    mu,
    sigma,
    lam: float,
    loss: LossSpec,
    n_samples: int,
    rng: np.random.Generator,
    y_baseline: float = 0.0,
    noise: NoiseSpec | None = None,
) -> IdentityReport:
    """Compare the untruncated bandit estimators with surrogate derivatives.

    With ``X ~ N(mu, Sigma)``, ``D = f(X) + eps - y_baseline``:
    ``g = D Sigma^{-1}(X - mu)`` and
    ``H = lam D Sigma^{-1/2}(W W^T - I) Sigma^{-1/2}`` with
    ``W = Sigma^{-1/2}(X - mu)``. Checks ``E[g] = E[grad s(Z)]`` and
    ``E[H] = E[hess s(Z)]`` for ``Z ~ N(mu, beta_sq Sigma)``.
    """
    spec = SurrogateSpec.build(loss, mu, sigma, lam)
    noise = noise or NoiseSpec()
    d = spec.d
    r_inv = spec.sigma.inv_sqrt
    hscale = lam / (1.0 - lam) ** 2
    streams = rng.spawn(4)

    def loss_diff(r, x):
        return _f(spec, x) + np.asarray(noise.draw(r, x.shape[0]), dtype=float) - y_baseline

    def g_est(r, k):
        x, g = spec.draw_x(r, k)
        return loss_diff(r, x)[:, None] * (g @ r_inv)

    def grad_s(r, k):
        x, g = spec.draw_x(r, k)
        z = spec.draw_z(r, k)
        return (_f(spec, spec.mix(x, z)) / (1.0 - lam))[:, None] * (g @ r_inv)

    def h_est(r, k):
        x, g = spec.draw_x(r, k)
        # Sigma^{-1/2}(W W^T - I)Sigma^{-1/2} = Sigma^{-1}(X-mu)(X-mu)^T Sigma^{-1} - Sigma^{-1}
        return (lam * loss_diff(r, x))[:, None] * spec.whitened_outer(g)

    def hess_s(r, k):
        x, g = spec.draw_x(r, k)
        z = spec.draw_z(r, k)
        return (hscale * _f(spec, spec.mix(x, z)))[:, None] * spec.whitened_outer(g)

    report = IdentityReport()
    report.checks.append(IdentityCheck("grad", mc_mean(g_est, n_samples, streams[0]), mc_mean(grad_s, n_samples, streams[1])))
    report.checks.append(IdentityCheck(
        "hess",
        _sym_estimate(mc_mean(h_est, n_samples, streams[2]), d),
        _sym_estimate(mc_mean(hess_s, n_samples, streams[3]), d),
    ))
    return report


# -- Gaussian moment closed forms ------------------------------------------------


def _check_psd(a) -> np.ndarray:
    a = linalg.as_sym(a)
    w = np.linalg.eigvalsh(a)
    if w[0] < -1e-12 * max(1.0, abs(w[-1])):
        raise NotPositiveDefinite(f"matrix has negative eigenvalue {w[0]:.3e}")
    return a


def gaussian_moment_oracle(a):
    """Reference closed forms for ``W ~ N(0, I)`` and PSD ``A``.

    Returns ``(tr A, tr(A)^2 + 2 tr(A^2), tr(A)^2 + tr(A^2), (d^2 + 2d - 1) tr(A^2))``,
    meant as ``E|W|_A^2``, ``E|W|_A^4``,
    ``E tr(A (WW^T - I) A (WW^T - I))`` and ``E tr(A (WW^T - I)^2 A)``.
    The last value is an upper bound that is exact only for ``d = 1``; see
    ``gaussian_moment_exact``.
    """
    a = _check_psd(a)
    d = a.shape[0]
    tr = float(np.trace(a))
    tr2 = float(np.sum(a * a))
    return tr, tr * tr + 2.0 * tr2, tr * tr + tr2, (d * d + 2 * d - 1) * tr2


def gaussian_moment_exact(a):
    """Same four expectations as ``gaussian_moment_oracle`` but all exact.

    Uses ``E[|W|^2 W W^T] = (d + 2) I``, so the last one is ``(d + 1) tr(A^2)``.
    """
    a = _check_psd(a)
    d = a.shape[0]
    tr = float(np.trace(a))
    tr2 = float(np.sum(a * a))
    return tr, tr * tr + 2.0 * tr2, tr * tr + tr2, (d + 1) * tr2


def gaussian_norm_moments(mu, sigma):
    """Reference closed forms for ``(E|Z|^2, E|Z|^4)`` with ``Z ~ N(mu, Sigma)``.

    ``E|Z|^4`` is taken as ``tr(S)^2 + 2 tr(S^2) + |mu|_S^2 + |mu|^4 + 2 tr(S) |mu|^2``
    which undercounts the ``|mu|_S^2`` term (exact coefficient 4, see
    ``gaussian_norm_moments_exact``); it is exact for ``mu = 0``.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    s = _check_psd(sigma)
    tr = float(np.trace(s))
    m2 = float(mu @ mu)
    e2 = tr + m2
    e4 = tr * tr + 2.0 * float(np.sum(s * s)) + float(mu @ s @ mu) + m2 * m2 + 2.0 * tr * m2
    assert e4 <= 3.0 * e2 * e2 * (1 + 1e-12)
    return e2, e4


def gaussian_norm_moments_exact(mu, sigma):
    mu = np.asarray(mu, dtype=float).reshape(-1)
    s = _check_psd(sigma)
    tr = float(np.trace(s))
    m2 = float(mu @ mu)
    e2 = tr + m2
    e4 = tr * tr + 2.0 * float(np.sum(s * s)) + 4.0 * float(mu @ s @ mu) + m2 * m2 + 2.0 * tr * m2
    assert e4 <= 3.0 * e2 * e2 * (1 + 1e-12)
    return e2, e4


def mc_gaussian_moments(a, n_samples: int, rng) -> list:
    """Monte-Carlo estimates of the four ``gaussian_moment_oracle`` expectations."""
    a = _check_psd(a)
    d = a.shape[0]
    tr_a2 = float(np.sum(a * a))

    def sample(r, k):
        w = r.standard_normal((k, d))
        aw = w @ a
        qa = np.einsum("ij,ij->i", w, aw)  # |W|_A^2
        aw2 = np.sum(aw * aw, axis=1)  # |A W|^2 = tr(A W W^T A)
        ww = np.sum(w * w, axis=1)
        return np.column_stack([qa, qa * qa, qa * qa - 2.0 * aw2 + tr_a2, ww * aw2 - 2.0 * aw2 + tr_a2])

    est = mc_mean(sample, n_samples, rng)
    return [McEstimate(est.value[i], est.stderr[i], est.samples) for i in range(4)]


def mc_norm_moments(mu, sigma, n_samples: int, rng) -> list:
    mu = np.asarray(mu, dtype=float).reshape(-1)
    root = _psd_sqrt(_check_psd(sigma))

    def sample(r, k):
        z = mu + r.standard_normal((k, mu.size)) @ root
        sq = np.sum(z * z, axis=1)
        return np.column_stack([sq, sq * sq])

    est = mc_mean(sample, n_samples, rng)
    return [McEstimate(est.value[i], est.stderr[i], est.samples) for i in range(2)]


def _psd_sqrt(a):
    w, q = np.linalg.eigh(linalg.as_sym(a))
    return (q * np.sqrt(np.clip(w, 0.0, None))) @ q.T


def gaussian_square_mgf(t: float, n_samples: int, rng) -> tuple:
    """MC estimate of ``E[exp(Z^2 / t^2)]`` for standard normal ``Z`` and its closed form ``1/sqrt(1 - 2/t^2)``.

    Finite only for ``t > sqrt(2)``; at ``t = 2`` the integrand has infinite
    variance, so the reported stderr is not a reliable error bar.
    """
    if not t > np.sqrt(2.0):
        raise ValueError("need t > sqrt(2) for a finite expectation")
    est = mc_mean(lambda r, k: np.exp(r.standard_normal(k) ** 2 / t**2), n_samples, rng, chunk=1 << 20)
    return est, 1.0 / np.sqrt(1.0 - 2.0 / t**2)
