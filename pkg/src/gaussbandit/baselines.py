"""Reference algorithms for regret comparisons.

``one_point_gd`` is classical one-point smoothed-gradient descent with
perturbation radius ``n**-1/4`` and constant step ``step_scale * n**-3/4``.
The default ``step_scale = R / (d C)`` with ``R = r`` and loss range
``C = 2r`` minimizes the usual one-point regret bound
``R^2/eta + eta n (d C / delta)^2 + delta n``.
``random_search`` samples uniformly from the ball of radius ``r`` around
the initial point and tracks the best observation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KINDS = ("one_point_gd", "random_search")


@dataclass(frozen=True)
class BaselineState:
    kind: str
    center: np.ndarray
    x_init: np.ndarray
    radius: float
    delta: float = 1.0
    step: float = 0.0
    best_x: np.ndarray | None = None
    best_y: float = np.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}")
        if self.kind == "one_point_gd" and not self.delta > 0:
            raise ValueError("perturbation radius must be positive")


def make_baseline(kind: str, n: int, x_init, r: float, step_scale: float | None = None) -> BaselineState:
    """Baseline state with the default tuning for horizon ``n``.

    ``step_scale`` defaults to ``1 / (2 d)``.
    """
    x0 = np.asarray(x_init, dtype=float).reshape(-1)
    d = x0.size
    if step_scale is None:
        step_scale = 1.0 / (2 * d)
    return BaselineState(
        kind=kind,
        center=x0.copy(),
        x_init=x0.copy(),
        radius=float(r),
        delta=float(n) ** -0.25,
        step=float(step_scale) * float(n) ** -0.75,
    )


def unit_ball_from_normals(g: np.ndarray) -> np.ndarray:
    """Map ``d + 2`` standard normals per row to a uniform point of the unit ball in ``d`` dims."""
    g = np.asarray(g, dtype=float)
    return g[..., :-2] / np.linalg.norm(g, axis=-1, keepdims=True)


def baseline_propose(state: BaselineState, rng: np.random.Generator) -> np.ndarray:
    d = state.center.size
    if state.kind == "one_point_gd":
        u = rng.standard_normal(d)
        return state.center + state.delta * (u / np.linalg.norm(u))
    return state.x_init + state.radius * unit_ball_from_normals(rng.standard_normal(d + 2))


def baseline_update(state: BaselineState, x, y: float) -> BaselineState:
    x = np.asarray(x, dtype=float)
    if state.kind == "one_point_gd":
        u = (x - state.center) / state.delta
        d = x.size
        return replace(state, center=state.center - state.step * (d / state.delta) * y * u)
    if y < state.best_y:
        return replace(state, best_x=x.copy(), best_y=float(y))
    return state
