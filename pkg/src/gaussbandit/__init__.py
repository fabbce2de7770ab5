"""Gaussian-search zeroth-order convex bandit optimization with Monte-Carlo checks."""

from ._accel import PURE_NUMPY, USING_NUMBA
from .baselines import BaselineState, baseline_propose, baseline_update, make_baseline
from .core import AlgoParams, GaussianSearchState, init, make_params, propose, update
from .environments import Environment, LossSpec, NoiseSpec, loss_eval, observe
from .harness import ExperimentConfig, RegretTrace, emit_outputs, fit_regret_slope, load_config, run_experiment
from .linalg import PsdFactorization, sym_eig, wasserstein2_gaussian
from .runs import run_baseline, run_gaussian_search
from .surrogate import SurrogateSpec, check_identities, estimator_bias_probe

__version__ = "0.1.0"
