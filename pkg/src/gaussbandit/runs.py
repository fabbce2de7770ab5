"""Full-horizon runs on a given environment, backed by the compiled kernels.

Random streams: replication ``rep`` of master seed ``s`` uses
``SeedSequence(s, spawn_key=(rep, k))`` with a Philox bit generator, where
``k = 0`` drives the algorithm's own sampling and ``k = 1`` the
environment noise. Each round consumes a fixed number of draws from each
stream (``d`` normals, or ``d + 2`` for random search; one noise value
unless the noise kind is ``none``), so the full draw arrays can be produced
up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .baselines import make_baseline, unit_ball_from_normals
from .core import AlgoParams
from .environments import Environment, LossSpec
from .errors import NonFiniteLoss

SEARCH_STREAM = 0
NOISE_STREAM = 1


def stream(master_seed: int, rep: int, which: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(rep), int(which)))
    return np.random.Generator(np.random.Philox(ss))


def replication_streams(master_seed: int, rep: int):
    return stream(master_seed, rep, SEARCH_STREAM), stream(master_seed, rep, NOISE_STREAM)


@dataclass
class RunResult:
    """Per-round arrays of one run. Optional fields are ``None`` for baselines."""

    xs: np.ndarray
    fx: np.ndarray
    f_star: float
    truncated: np.ndarray | None = None
    clipped: np.ndarray | None = None
    potential: np.ndarray | None = None
    trace_inv: np.ndarray | None = None
    min_eig_sigma: np.ndarray | None = None
    cov_ok: np.ndarray | None = None
    trace_ok: np.ndarray | None = None
    w_norm: np.ndarray | None = None
    d_t: np.ndarray | None = None
    g_norm: np.ndarray | None = None
    ys: np.ndarray | None = None
    residuals: np.ndarray | None = None
    loss: LossSpec | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.fx.shape[0]

    @property
    def instant_regret(self) -> np.ndarray:
        return self.fx - self.f_star

    @property
    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.instant_regret)

    def average_iterate_error(self, ts) -> np.ndarray:
        """``f(mean(X_1..X_t)) - f*`` at each 1-based round count in ``ts``."""
        ts = np.asarray(ts, dtype=int)
        means = np.cumsum(self.xs, axis=0)[ts - 1] / ts[:, None]
        return self.loss(means) - self.f_star


def _loss_args(env: Environment):
    s = env.loss
    return s.code, s.center, np.ascontiguousarray(s.directions), s.offsets, s.curvature


def _noise(env: Environment, rng, n: int) -> np.ndarray:
    return np.asarray(env.noise.draw(rng, n), dtype=float)


def run_gaussian_search(env: Environment, params: AlgoParams, seed: int, rep: int = 0, x_ref=None, debug: bool = False) -> RunResult:
    """Run the Gaussian search bandit for ``params.n`` rounds on ``env``."""
    rng_search, rng_noise = replication_streams(seed, rep)
    n, d = params.n, params.d
    z = rng_search.standard_normal((n, d))
    eps = _noise(env, rng_noise, n)
    if x_ref is None:
        x_ref = env.minimizer if env.minimizer is not None else params.x_init
    out = kernels.run_gaussian_search(
        z, eps, params.x_init.astype(float), params.sigma1, params.eta, params.lam,
        params.w_max, params.d_max, params.sigma_max_inv, np.asarray(x_ref, dtype=float),
        *_loss_args(env), bool(debug),
    )
    (status, xs, fx, ys, w_norm, d_t, g_norm, truncated, clipped,
     potential, trace_inv, min_eig_sigma, cov_ok, trace_ok, residuals) = out
    if status != kernels.OK:
        raise NonFiniteLoss("environment returned a non-finite value")
    return RunResult(
        xs=xs, fx=fx, f_star=env.f_star, truncated=truncated, clipped=clipped, potential=potential,
        trace_inv=trace_inv, min_eig_sigma=min_eig_sigma, cov_ok=cov_ok, trace_ok=trace_ok,
        w_norm=w_norm, d_t=d_t, g_norm=g_norm, ys=ys, residuals=residuals, loss=env.loss,
    )


def run_baseline(env: Environment, kind: str, n: int, x_init, r: float, seed: int, rep: int = 0, step_scale=None) -> RunResult:
    rng_search, rng_noise = replication_streams(seed, rep)
    x_init = np.asarray(x_init, dtype=float)
    d = x_init.size
    state = make_baseline(kind, n, x_init, r, step_scale)
    if kind == "one_point_gd":
        z = rng_search.standard_normal((n, d))
        eps = _noise(env, rng_noise, n)
        status, xs, fx = kernels.run_one_point_gd(z, eps, x_init, state.delta, state.step, *_loss_args(env))
        if status != kernels.OK:
            raise NonFiniteLoss("environment returned a non-finite value")
    else:
        xs = x_init + r * unit_ball_from_normals(rng_search.standard_normal((n, d + 2)))
        fx = np.asarray(env.loss(xs), dtype=float)
        if not np.all(np.isfinite(fx)):
            raise NonFiniteLoss("environment returned a non-finite value")
    return RunResult(xs=xs, fx=fx, f_star=env.f_star, loss=env.loss)
