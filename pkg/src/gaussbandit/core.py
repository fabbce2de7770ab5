"""Gaussian search bandit: parameters, state, and the per-round update.

This module is the step-at-a-time reference. ``run.run_gaussian_search``
drives the compiled loop in ``kernels`` for full horizons; the two are
tested against each other.

Constants ``C``, ``c`` and ``m`` of the theoretical parameterization are
only known to exist ("suitably large/small"); the defaults of 1 are
placeholders, not validated choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .errors import InvalidHorizon, InvalidRadius, NonFinite, StateMismatch

LAMBDA_CAP = 0.99
MODES = ("theoretical", "practical")


@dataclass(frozen=True)
class AlgoParams:
    n: int
    d: int
    r: float
    x_init: np.ndarray
    mode: str
    C: float
    c: float
    m: float
    log_p: float
    w_max: float
    d_max: float
    eta: float
    lam: float
    f_max: float
    sigma_max_inv: float

    @property
    def sigma1(self) -> float:
        """Initial isotropic variance ``(r / d)**2``."""
        return (self.r / self.d) ** 2

    @property
    def beta_sq(self) -> float:
        return (2.0 - self.lam) / self.lam


def make_params(
    n: int,
    d: int,
    r: float,
    x_init=None,
    mode: str = "practical",
    C: float = 1.0,
    c: float = 1.0,
    m: float = 1.0,
    *,
    eta: float | None = None,
    lam: float | None = None,
) -> AlgoParams:
    """Derive the learning rate, surrogate parameter and truncation levels.

    ``theoretical`` evaluates the logarithmic formulas with constants
    ``C, c, m``; ``practical`` drops log factors and truncation. In both
    modes ``lam`` is capped at 0.99 so it stays inside (0, 1). ``eta`` and
    ``lam`` keyword overrides exist for hand-checked scenarios.
    """
    if n < 2:
        raise InvalidHorizon(f"horizon must be >= 2, got {n}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not r >= 1:
        raise InvalidRadius(f"radius must be >= 1, got {r}")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not (C >= 1 and 0 < c <= 1 and m >= 1):
        raise ValueError("constants need C >= 1, 0 < c <= 1, m >= 1")
    x0 = np.zeros(d) if x_init is None else np.asarray(x_init, dtype=float).reshape(-1)
    if x0.shape != (d,):
        raise StateMismatch(f"x_init has shape {x0.shape}, expected ({d},)")

    log_p = m * math.log(max(2.0, n, d, r))
    f_max = C * d**2 * log_p**3
    sigma_max_inv = (n * d**2 / r**2 + d * n**2 / 4 + n) ** 2
    if mode == "theoretical":
        w_max = C * math.sqrt(d * log_p)
        d_max = C * (1 + r / d) * math.sqrt(log_p)
        eta_val = c / d_max * min(math.sqrt(d / n), 1 / (d * math.sqrt(log_p)))
        lam_val = c / math.sqrt(f_max * log_p)
    else:
        w_max = math.inf
        d_max = math.inf
        eta_val = 1 / (1 + r / d) * math.sqrt(d / n)
        lam_val = 1 / d
    lam_val = min(lam_val, LAMBDA_CAP)
    if eta is not None:
        eta_val = float(eta)
    if lam is not None:
        lam_val = float(lam)
    if not eta_val > 0:
        raise ValueError("eta must be positive")
    if not 0 < lam_val <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    return AlgoParams(
        n=int(n), d=int(d), r=float(r), x_init=x0, mode=mode, C=float(C), c=float(c), m=float(m),
        log_p=log_p, w_max=w_max, d_max=d_max, eta=eta_val, lam=lam_val, f_max=f_max,
        sigma_max_inv=sigma_max_inv,
    )


@dataclass(frozen=True)
class DiagnosticFlags:
    cov_le_two_sigma1: bool
    trace_inv_ok: bool
    potential: float


@dataclass(frozen=True)
class StepRecord:
    t: int
    x: np.ndarray
    y: float
    w_norm: float
    truncated: bool
    d_t: float
    g_norm: float
    hessian_skipped: bool
    diag: DiagnosticFlags


@dataclass(frozen=True)
class GaussianSearchState:
    """Mean, precision factorization and last observation before round ``t``."""

    t: int
    mu: np.ndarray
    precision: linalg.PsdFactorization
    y_prev: float | None = None
    trunc_count: int = 0
    clip_count: int = 0
    sigma1: linalg.PsdFactorization | None = field(default=None, repr=False)

    @property
    def sigma(self) -> np.ndarray:
        return self.precision.inv

    @property
    def sigma_sqrt(self) -> np.ndarray:
        return self.precision.inv_sqrt

    @property
    def sigma_inv_sqrt(self) -> np.ndarray:
        return self.precision.sqrt


def init(params: AlgoParams) -> GaussianSearchState:
    """Round-1 state: mean ``x_init`` and covariance ``(r/d)^2 I``."""
    d = params.d
    prec = linalg.sym_eig(np.eye(d) / params.sigma1)
    cov1 = linalg.sym_eig(params.sigma1 * np.eye(d))
    return GaussianSearchState(t=1, mu=params.x_init.copy(), precision=prec, sigma1=cov1)


def propose(state: GaussianSearchState, rng: np.random.Generator) -> np.ndarray:
    """Draw ``X = mu + Sigma^{1/2} z`` with ``z`` standard normal from ``rng``."""
    z = rng.standard_normal(state.mu.shape[0])
    return state.mu + state.sigma_sqrt @ z


def diagnostics(state_next: GaussianSearchState, params: AlgoParams, sigma1: linalg.PsdFactorization, x_ref=None) -> DiagnosticFlags:
    """Stability indicators of the post-update state.

    ``potential`` is ``0.5 |mu - x_ref|^2`` in the precision metric;
    ``x_ref`` defaults to ``params.x_init``.
    """
    x_ref = params.x_init if x_ref is None else np.asarray(x_ref, dtype=float)
    # 2 Sigma1 - Sigma_{t+1} >= 0 via its smallest eigenvalue
    gap = 2.0 * sigma1.source - state_next.sigma
    min_gap = np.linalg.eigvalsh(0.5 * (gap + gap.T))[0]
    cov_ok = bool(min_gap >= -1e-10 * sigma1.eigvals[-1])
    trace_inv, _, _, _ = linalg.spectral_stats(state_next.precision)
    v = state_next.mu - x_ref
    potential = 0.5 * float(v @ state_next.precision.source @ v)
    return DiagnosticFlags(cov_ok, bool(trace_inv <= params.sigma_max_inv), potential)


def update(state: GaussianSearchState, params: AlgoParams, x, y: float, x_ref=None):
    """Consume the observation ``y`` at the proposed point ``x``.

    Returns ``(next_state, StepRecord)``. Round 1 only stores ``y``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != state.mu.shape:
        raise StateMismatch(f"point has shape {x.shape}, state dim is {state.mu.shape}")
    if not np.isfinite(y):
        raise NonFinite("observation is not finite")
    sigma1 = state.sigma1 if state.sigma1 is not None else linalg.sym_eig(params.sigma1 * np.eye(params.d))

    diff = x - state.mu
    w = state.sigma_inv_sqrt @ diff
    w_norm = float(np.linalg.norm(w))
    truncated = False
    d_t = 0.0
    g_norm = 0.0
    skipped = False
    mu_next = state.mu
    prec_next = state.precision

    if state.t >= 2:
        dy = y - state.y_prev
        if abs(dy) <= params.d_max and w_norm <= params.w_max:
            d_t = float(dy)
        else:
            truncated = True
        if d_t != 0.0:
            g = d_t * (state.precision.source @ diff)
            g_norm = float(np.linalg.norm(g))
            root = state.sigma_inv_sqrt
            h = params.lam * d_t * (root @ (np.outer(w, w) - np.eye(params.d)) @ root)
            mu_next = state.mu - params.eta * d_t * diff
            new_prec, skipped = linalg.update_precision(state.precision.source, h, params.eta)
            if not skipped:
                prec_next = linalg.sym_eig(new_prec)

    nxt = replace(
        state,
        t=state.t + 1,
        mu=mu_next,
        precision=prec_next,
        y_prev=float(y),
        trunc_count=state.trunc_count + int(truncated),
        clip_count=state.clip_count + int(skipped),
        sigma1=sigma1,
    )
    rec = StepRecord(
        t=state.t, x=x, y=float(y), w_norm=w_norm, truncated=truncated, d_t=d_t, g_norm=g_norm,
        hessian_skipped=skipped, diag=diagnostics(nxt, params, sigma1, x_ref),
    )
    return nxt, rec


def hessian_estimate(state: GaussianSearchState, params: AlgoParams, x, d_t: float) -> np.ndarray:
    """``lam D Sigma^{-1/2} (W W^T - I) Sigma^{-1/2}`` for an already-truncated ``D``."""
    root = state.sigma_inv_sqrt
    w = root @ (np.asarray(x, dtype=float) - state.mu)
    return params.lam * d_t * (root @ (np.outer(w, w) - np.eye(params.d)) @ root)


def gradient_estimate(state: GaussianSearchState, x, d_t: float) -> np.ndarray:
    return d_t * (state.precision.source @ (np.asarray(x, dtype=float) - state.mu))
