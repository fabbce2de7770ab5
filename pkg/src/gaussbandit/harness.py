"""Experiment runner: configs, seeded replications, regret traces and outputs."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import runs
from .core import make_params
from .environments import Environment, LossSpec, NoiseSpec
from .errors import ConfigInvalid, InsufficientData, NonpositiveRegret

ALGORITHMS = ("paper_practical", "paper_theoretical", "one_point_gd", "random_search")
OUT_ENV_VAR = "GAUSSBANDIT_OUT"
CSV_COLUMNS = (
    "replication", "t", "regret_cum", "trunc_count", "clip_count",
    "potential", "trace_sigma_inv", "min_eig_sigma",
)
DEFAULT_SLOPE_FROM = 2**10


def default_checkpoints(n: int) -> list:
    """Powers of two up to ``n``, plus ``n`` itself."""
    pts = [2**k for k in range(int(math.log2(n)) + 1) if 2**k <= n]
    if pts[-1] != n:
        pts.append(n)
    return pts


@dataclass
class ExperimentConfig:
    loss: LossSpec
    noise: NoiseSpec
    radius: float
    x_init: np.ndarray
    algorithm: str = "paper_practical"
    horizon: int = 1024
    replications: int = 1
    seed: int = 0
    checkpoints: list | None = None
    output: str | None = None
    constants: dict = field(default_factory=lambda: {"C": 1.0, "c": 1.0, "m": 1.0})
    step_scale: float | None = None
    x_ref: np.ndarray | None = None
    workers: int = 1
    debug: bool = False

    def __post_init__(self):
        self.x_init = np.asarray(self.x_init, dtype=float).reshape(-1)
        if self.x_init.shape != (self.loss.dim,):
            raise ConfigInvalid("x_init dimension does not match the loss")
        if self.algorithm not in ALGORITHMS:
            raise ConfigInvalid(f"algorithm must be one of {ALGORITHMS}")
        if self.horizon < 2:
            raise ConfigInvalid("horizon must be >= 2")
        if self.replications < 1:
            raise ConfigInvalid("replications must be >= 1")
        if not self.radius >= 1:
            raise ConfigInvalid("radius must be >= 1")
        if not self.loss.bounded_below or self.loss.minimizer is None:
            raise ConfigInvalid(f"{self.loss.kind} loss has no minimizer; regret is undefined")
        if self.checkpoints is None:
            self.checkpoints = default_checkpoints(self.horizon)
        cps = [int(c) for c in self.checkpoints]
        if not cps or cps != sorted(set(cps)) or cps[0] < 1 or cps[-1] > self.horizon:
            raise ConfigInvalid("checkpoints must be strictly increasing within [1, horizon]")
        self.checkpoints = cps
        unknown = set(self.constants) - {"C", "c", "m"}
        if unknown:
            raise ConfigInvalid(f"unknown constants {sorted(unknown)}")
        self.constants = {"C": 1.0, "c": 1.0, "m": 1.0, **{k: float(v) for k, v in self.constants.items()}}
        if self.x_ref is not None:
            self.x_ref = np.asarray(self.x_ref, dtype=float).reshape(-1)

    @property
    def env(self) -> Environment:
        return Environment(self.loss, self.noise)

    @property
    def dim(self) -> int:
        return self.loss.dim

    def params(self):
        mode = "theoretical" if self.algorithm == "paper_theoretical" else "practical"
        return make_params(self.horizon, self.dim, self.radius, self.x_init, mode, **self.constants)

    def to_dict(self) -> dict:
        algo = {"name": self.algorithm}
        if self.algorithm == "paper_theoretical":
            algo.update(self.constants)
        if self.algorithm == "one_point_gd" and self.step_scale is not None:
            algo["step_scale"] = self.step_scale
        out = {
            "environment": {
                "loss": self.loss.to_dict(),
                "noise": self.noise.to_dict(),
                "radius": self.radius,
                "x_init": self.x_init.tolist(),
            },
            "algorithm": algo,
            "horizon": self.horizon,
            "replications": self.replications,
            "seed": self.seed,
            "checkpoints": list(self.checkpoints),
            "output": self.output,
            "workers": self.workers,
            "debug": self.debug,
        }
        if self.x_ref is not None:
            out["environment"]["x_ref"] = self.x_ref.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _no_unknown(data, {"environment", "algorithm", "horizon", "replications", "seed",
                           "checkpoints", "output", "workers", "debug"}, "config")
        if "environment" not in data:
            raise ConfigInvalid("config needs an environment section")
        env = data["environment"]
        _no_unknown(env, {"loss", "noise", "radius", "x_init", "x_ref"}, "environment")
        loss = LossSpec.from_dict(env["loss"])
        noise = NoiseSpec.from_dict(env.get("noise", {"kind": "none"}))
        algo = data.get("algorithm", {"name": "paper_practical"})
        if isinstance(algo, str):
            algo = {"name": algo}
        _no_unknown(algo, {"name", "C", "c", "m", "step_scale"}, "algorithm")
        constants = {k: algo[k] for k in ("C", "c", "m") if k in algo}
        if constants and algo.get("name") != "paper_theoretical":
            raise ConfigInvalid("constants C, c, m apply only to paper_theoretical")
        return cls(
            loss=loss,
            noise=noise,
            radius=float(env.get("radius", 1.0)),
            x_init=env.get("x_init", np.zeros(loss.dim)),
            x_ref=env.get("x_ref"),
            algorithm=algo.get("name", "paper_practical"),
            constants=constants,
            step_scale=algo.get("step_scale"),
            horizon=int(data.get("horizon", 1024)),
            replications=int(data.get("replications", 1)),
            seed=int(data.get("seed", 0)),
            checkpoints=data.get("checkpoints"),
            output=data.get("output"),
            workers=int(data.get("workers", 1)),
            debug=bool(data.get("debug", False)),
        )


def _no_unknown(data, allowed, where):
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{where} must be a mapping")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigInvalid(f"unknown keys in {where}: {sorted(unknown)}")


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return ExperimentConfig.from_dict(data or {})


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


@dataclass
class RegretTrace:
    """Checkpointed per-replication series; arrays are ``(replications, checkpoints)``."""

    checkpoints: np.ndarray
    regret: np.ndarray
    trunc_count: np.ndarray
    clip_count: np.ndarray
    potential: np.ndarray
    trace_sigma_inv: np.ndarray
    min_eig_sigma: np.ndarray
    avg_iterate_error: np.ndarray
    final_regret: np.ndarray
    horizon: int
    residuals: np.ndarray | None = None

    @property
    def replications(self) -> int:
        return self.regret.shape[0]

    def median_regret(self) -> np.ndarray:
        return np.median(self.regret, axis=0)

    def summary(self) -> dict:
        fr = self.final_regret
        q = np.quantile(fr, [0.1, 0.25, 0.5, 0.75, 0.9])
        out = {
            "replications": int(self.replications),
            "horizon": int(self.horizon),
            "final_regret": {
                "mean": float(np.mean(fr)), "median": float(q[2]), "min": float(np.min(fr)),
                "max": float(np.max(fr)), "q10": float(q[0]), "q25": float(q[1]),
                "q75": float(q[3]), "q90": float(q[4]),
                "per_replication": [float(v) for v in fr],
            },
            "average_iterate_error": {
                "per_replication": [float(v) for v in self.avg_iterate_error[:, -1]],
                "mean": float(np.mean(self.avg_iterate_error[:, -1])),
            },
            "truncations_total": int(self.trunc_count[:, -1].sum()),
            "clips_total": int(self.clip_count[:, -1].sum()),
        }
        lo = DEFAULT_SLOPE_FROM if self.checkpoints[-1] >= 4 * DEFAULT_SLOPE_FROM else 1
        try:
            fit = fit_regret_slope(self, (lo, int(self.checkpoints[-1])))
            out["slope"] = {"from": lo, "to": int(self.checkpoints[-1]), "exponent": fit.exponent,
                            "intercept": fit.intercept, "r_squared": fit.r_squared}
        except (InsufficientData, NonpositiveRegret) as exc:
            out["slope"] = {"error": str(exc)}
        if self.residuals is not None:
            out["identity_residuals_max"] = [float(v) for v in self.residuals.max(axis=0)]
        return out


def _run_replication(args):
    config, rep = args
    env = config.env
    n = config.horizon
    cps = np.asarray(config.checkpoints)
    idx = cps - 1
    if config.algorithm.startswith("paper"):
        res = runs.run_gaussian_search(env, config.params(), config.seed, rep, x_ref=config.x_ref, debug=config.debug)
        trunc = np.cumsum(res.truncated)[idx]
        clip = np.cumsum(res.clipped)[idx]
        pot = res.potential[idx]
        tr_inv = res.trace_inv[idx]
        min_eig = res.min_eig_sigma[idx]
        resid = res.residuals
    else:
        res = runs.run_baseline(env, config.algorithm, n, config.x_init, config.radius, config.seed, rep, config.step_scale)
        zeros = np.zeros(len(cps), dtype=np.int64)
        nan = np.full(len(cps), np.nan)
        trunc, clip, pot, tr_inv, min_eig = zeros, zeros, nan, nan, nan
        resid = np.zeros(3)
    cum = res.cumulative_regret
    return (cum[idx], trunc, clip, pot, tr_inv, min_eig, res.average_iterate_error(cps), cum[-1], resid)


def run_experiment(config: ExperimentConfig) -> RegretTrace:
    """Run all replications; results are ordered by replication index regardless of scheduling."""
    jobs = [(config, rep) for rep in range(config.replications)]
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_replication, jobs))
    else:
        results = [_run_replication(j) for j in jobs]
    cols = list(zip(*results))
    return RegretTrace(
        checkpoints=np.asarray(config.checkpoints),
        regret=np.vstack(cols[0]),
        trunc_count=np.vstack(cols[1]),
        clip_count=np.vstack(cols[2]),
        potential=np.vstack(cols[3]),
        trace_sigma_inv=np.vstack(cols[4]),
        min_eig_sigma=np.vstack(cols[5]),
        avg_iterate_error=np.vstack(cols[6]),
        final_regret=np.asarray(cols[7], dtype=float),
        horizon=config.horizon,
        residuals=np.vstack(cols[8]) if config.debug else None,
    )


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    intercept: float
    r_squared: float


def fit_power_law(ts, values) -> SlopeFit:
    """Least-squares line through ``(log t, log value)``."""
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.size < 4:
        raise InsufficientData(f"need at least 4 points, got {ts.size}")
    if np.any(values <= 0):
        raise NonpositiveRegret("log-log fit needs positive regret at every checkpoint")
    lx, ly = np.log(ts), np.log(values)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), float(r2))


def fit_regret_slope(trace: RegretTrace, window=None, statistic: str = "median") -> SlopeFit:
    """Fit ``log Reg_t ~ a log t + b`` over checkpoints within ``window = (t0, t1)``.

    ``statistic`` aggregates replications per checkpoint (``median`` or ``mean``).
    """
    agg = {"median": np.median, "mean": np.mean}[statistic]
    vals = agg(trace.regret, axis=0)
    ts = trace.checkpoints
    if window is not None:
        keep = (ts >= window[0]) & (ts <= window[1])
        ts, vals = ts[keep], vals[keep]
    return fit_power_law(ts, vals)


def _fmt(v) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def trace_csv(trace: RegretTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in range(trace.replications):
        for k, t in enumerate(trace.checkpoints):
            w.writerow([
                rep, int(t), _fmt(trace.regret[rep, k]), int(trace.trunc_count[rep, k]),
                int(trace.clip_count[rep, k]), _fmt(trace.potential[rep, k]),
                _fmt(trace.trace_sigma_inv[rep, k]), _fmt(trace.min_eig_sigma[rep, k]),
            ])
    return buf.getvalue()


def resolve_output(config: ExperimentConfig, out=None) -> Path:
    """Output directory: explicit argument, then ``$GAUSSBANDIT_OUT``, then the config's ``output``."""
    chosen = out or os.environ.get(OUT_ENV_VAR) or config.output
    if not chosen:
        raise ConfigInvalid("no output directory given")
    return Path(chosen)


def emit_outputs(trace: RegretTrace, config: ExperimentConfig, out_dir) -> dict:
    """Write ``regret.csv``, ``summary.json`` and ``config.yaml`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out_dir / "regret.csv", "summary": out_dir / "summary.json", "config": out_dir / "config.yaml"}
    paths["csv"].write_text(trace_csv(trace))
    summary = trace.summary()
    summary["algorithm"] = config.algorithm
    summary["seed"] = config.seed
    summary["config"] = config.to_dict()
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths["config"].write_text(dump_config(config))
    return paths


def read_csv(path):
    """Load a regret CSV into ``(checkpoints, regret[rep, k])``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InsufficientData("empty CSV")
    reps = {r: i for i, r in enumerate(sorted({int(r["replication"]) for r in rows}))}
    ts = sorted({int(r["t"]) for r in rows})
    col = {t: i for i, t in enumerate(ts)}
    reg = np.full((len(reps), len(ts)), np.nan)
    for r in rows:
        reg[reps[int(r["replication"])], col[int(r["t"])]] = float(r["regret_cum"])
    return np.asarray(ts), reg
