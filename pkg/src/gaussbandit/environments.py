"""Convex 1-Lipschitz test losses and zero-mean noise models.

Every loss is stored as one flat record (kind code plus parameter arrays) so
the same description drives the vectorized numpy evaluator used by the
Monte-Carlo code and the scalar evaluator inside the compiled run loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch

LOSS_KINDS = ("affine", "distance", "max_affine", "huberized_quadratic")
NOISE_KINDS = ("none", "gaussian", "uniform")
KIND_CODES = {name: i for i, name in enumerate(LOSS_KINDS)}


@dataclass(frozen=True)
class LossSpec:
    """A convex loss with Lipschitz constant at most 1.

    ``directions``/``offsets`` hold the affine pieces (one row for
    ``affine``), ``center`` the minimizer of the radial kinds, and
    ``curvature`` the quadratic coefficient of the Huber-type loss, which is
    linear with unit slope once ``|x - center| > 1 / curvature``.
    """

    kind: str
    dim: int
    center: np.ndarray = field(default=None)
    directions: np.ndarray = field(default=None)
    offsets: np.ndarray = field(default=None)
    curvature: float = 1.0
    minimizer: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigInvalid(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        d = int(self.dim)
        if d < 1:
            raise ConfigInvalid("dim must be >= 1")
        object.__setattr__(self, "dim", d)
        center = np.zeros(d) if self.center is None else np.asarray(self.center, dtype=float).reshape(-1)
        if center.shape != (d,):
            raise DimensionMismatch(f"center has shape {center.shape}, expected ({d},)")
        object.__setattr__(self, "center", center)

        if self.kind in ("affine", "max_affine"):
            if self.directions is None:
                raise ConfigInvalid(f"{self.kind} loss needs directions")
            a = np.atleast_2d(np.asarray(self.directions, dtype=float))
            if a.shape[1] != d:
                raise DimensionMismatch(f"directions have {a.shape[1]} columns, expected {d}")
            if self.kind == "affine" and a.shape[0] != 1:
                raise ConfigInvalid("affine loss takes exactly one direction")
            if np.any(np.linalg.norm(a, axis=1) > 1.0 + 1e-12):
                raise ConfigInvalid("every direction must have norm <= 1")
            b = np.zeros(a.shape[0]) if self.offsets is None else np.asarray(self.offsets, dtype=float).reshape(-1)
            if b.shape != (a.shape[0],):
                raise DimensionMismatch("offsets must match the number of directions")
        else:
            a = np.zeros((1, d))
            b = np.zeros(1)
        object.__setattr__(self, "directions", a)
        object.__setattr__(self, "offsets", b)

        if self.kind == "huberized_quadratic" and not self.curvature > 0:
            raise ConfigInvalid("curvature must be positive")
        object.__setattr__(self, "curvature", float(self.curvature))

        if self.minimizer is not None:
            m = np.asarray(self.minimizer, dtype=float).reshape(-1)
            if m.shape != (d,):
                raise DimensionMismatch("minimizer has the wrong dimension")
            object.__setattr__(self, "minimizer", m)
        elif self.kind in ("distance", "huberized_quadratic"):
            object.__setattr__(self, "minimizer", center.copy())
        elif self.kind == "max_affine":
            object.__setattr__(self, "minimizer", _max_affine_argmin(a, b))

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def bounded_below(self) -> bool:
        if self.kind == "max_affine":
            return self.minimizer is not None
        return self.kind != "affine"

    def __call__(self, x):
        return loss_eval(self, x)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind in ("distance", "huberized_quadratic"):
            out["center"] = self.center.tolist()
        if self.kind == "huberized_quadratic":
            out["curvature"] = self.curvature
        if self.kind in ("affine", "max_affine"):
            out["directions"] = self.directions.tolist()
            out["offsets"] = self.offsets.tolist()
        if self.kind == "max_affine" and self.minimizer is not None:
            out["minimizer"] = self.minimizer.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LossSpec":
        allowed = {"kind", "dim", "center", "directions", "offsets", "curvature", "minimizer"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigInvalid(f"unknown loss keys: {sorted(unknown)}")
        if "kind" not in data:
            raise ConfigInvalid("loss needs a kind")
        data = dict(data)
        if "dim" not in data:
            for key in ("center", "minimizer"):
                if key in data:
                    data["dim"] = len(data[key])
                    break
            else:
                if "directions" in data:
                    data["dim"] = len(np.atleast_2d(data["directions"])[0])
                else:
                    raise ConfigInvalid("loss needs dim")
        return cls(**data)


def _max_affine_argmin(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    from scipy.optimize import linprog

    k, d = a.shape
    # variables (x, t): minimize t subject to a x + b <= t
    cost = np.zeros(d + 1)
    cost[-1] = 1.0
    res = linprog(
        cost,
        A_ub=np.hstack([a, -np.ones((k, 1))]),
        b_ub=-b,
        bounds=[(None, None)] * (d + 1),
        method="highs",
    )
    if res.status != 0:
        return None
    return res.x[:d]


# -- constructors ------------------------------------------------------------


def affine(direction, offset: float = 0.0) -> LossSpec:
    c = np.atleast_1d(np.asarray(direction, dtype=float))
    return LossSpec("affine", c.size, directions=c[None, :], offsets=[offset])


def distance(center) -> LossSpec:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return LossSpec("distance", c.size, center=c)


def huberized_quadratic(center, curvature: float = 1.0) -> LossSpec:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return LossSpec("huberized_quadratic", c.size, center=c, curvature=curvature)


def max_affine(directions, offsets, minimizer=None) -> LossSpec:
    a = np.atleast_2d(np.asarray(directions, dtype=float))
    return LossSpec("max_affine", a.shape[1], directions=a, offsets=offsets, minimizer=minimizer)


def skewed_polytope(center) -> LossSpec:
    """Max-affine loss with facets ``+e_j`` (slope 1) and ``-e_j`` (slope 1/2) around ``center``.

    Minimum value 0, attained only at ``center``.
    """
    c = np.atleast_1d(np.asarray(center, dtype=float))
    d = c.size
    a = np.vstack([np.eye(d), -0.5 * np.eye(d)])
    return LossSpec("max_affine", d, directions=a, offsets=-a @ c, minimizer=c)


# -- evaluation --------------------------------------------------------------


def loss_eval(spec: LossSpec, x):
    """Evaluate the loss at one point (shape ``(d,)``) or a batch (shape ``(N, d)``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim or x.ndim > 2:
        raise DimensionMismatch(f"point has shape {x.shape}, loss dim is {spec.dim}")
    if spec.kind == "affine":
        out = x @ spec.directions[0] + spec.offsets[0]
    elif spec.kind == "max_affine":
        out = np.max(x @ spec.directions.T + spec.offsets, axis=-1)
    else:
        r = np.sqrt(np.sum((x - spec.center) ** 2, axis=-1))
        if spec.kind == "distance":
            out = r
        else:
            k = spec.curvature
            out = np.where(r <= 1.0 / k, 0.5 * k * r * r, r - 0.5 / k)
    return float(out) if x.ndim == 1 else out


@dataclass(frozen=True)
class NoiseSpec:
    """Additive, conditionally zero-mean noise.

    ``uniform`` draws from ``[-scale*sqrt(3), scale*sqrt(3)]`` so both
    random kinds have variance ``scale**2``.
    """

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigInvalid(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not self.scale >= 0:
            raise ConfigInvalid("noise scale must be >= 0")
        object.__setattr__(self, "scale", float(self.scale))

    def draw(self, rng: np.random.Generator, size=None):
        """Noise samples; a batch draw equals the same number of scalar draws in order."""
        if self.kind == "none":
            return 0.0 if size is None else np.zeros(size)
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal(size)
        half = self.scale * np.sqrt(3.0)
        return rng.uniform(-half, half, size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.scale}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        unknown = set(data) - {"kind", "scale"}
        if unknown:
            raise ConfigInvalid(f"unknown noise keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Environment:
    loss: LossSpec
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    @property
    def dim(self) -> int:
        return self.loss.dim

    @property
    def minimizer(self):
        return self.loss.minimizer

    @property
    def f_star(self) -> float:
        if self.loss.minimizer is None:
            return float("-inf")
        return loss_eval(self.loss, self.loss.minimizer)


def observe(env: Environment, x, rng: np.random.Generator) -> float:
    """Noisy value ``f(x) + eps``; with no noise this is exactly ``f(x)`` and consumes no draws."""
    fx = loss_eval(env.loss, x)
    if env.noise.kind == "none":
        return fx
    return fx + float(env.noise.draw(rng))


# -- probes ------------------------------------------------------------------


def _ball_pairs(spec: LossSpec, rng, trials: int, radius: float, center):
    d = spec.dim
    if center is None:
        center = spec.minimizer if spec.minimizer is not None else np.zeros(d)
    center = np.asarray(center, dtype=float)
    u = rng.standard_normal((trials, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    x = center + radius * rng.random((trials, 1)) ** (1.0 / d) * u
    v = rng.standard_normal((trials, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    # separations spread over several orders of magnitude to catch local slopes
    sep = radius * 10.0 ** rng.uniform(-4.0, np.log10(2.0), (trials, 1))
    y = x + sep * v
    return x, y


def lipschitz_probe(spec: LossSpec, rng: np.random.Generator, trials: int, radius: float, center=None) -> float:
    """Largest ``|f(x) - f(y)| / |x - y|`` over random pairs near a ball of the given radius."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x, y = _ball_pairs(spec, rng, trials, radius, center)
    ratio = np.abs(loss_eval(spec, x) - loss_eval(spec, y)) / np.linalg.norm(x - y, axis=1)
    return float(np.max(ratio))


def convexity_probe(spec: LossSpec, rng: np.random.Generator, trials: int, radius: float, center=None) -> float:
    """Largest midpoint violation ``f((x+y)/2) - (f(x)+f(y))/2`` over random pairs (<= 0 for convex f)."""
    x, y = _ball_pairs(spec, rng, trials, radius, center)
    gap = loss_eval(spec, 0.5 * (x + y)) - 0.5 * (loss_eval(spec, x) + loss_eval(spec, y))
    return float(np.max(gap))
