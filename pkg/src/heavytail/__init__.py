"""heavytail: samplers, drift verification and theory verdicts for heavy-tailed targets."""

__version__ = "0.1.0"

from .diagnostics import TestFunctionSpec
from .kernels import ChainState, KernelConfig
from .oracle import AlgorithmId, CltQuery, RatePrediction, Verdict, best_algorithm, clt_verdict, rate_prediction
from .rng import RngStream
from .runner import ExperimentConfig, run_ensemble, run_experiment
from .targets import TargetSpec

__all__ = [
    "AlgorithmId",
    "ChainState",
    "CltQuery",
    "ExperimentConfig",
    "KernelConfig",
    "RatePrediction",
    "RngStream",
    "TargetSpec",
    "TestFunctionSpec",
    "Verdict",
    "best_algorithm",
    "clt_verdict",
    "rate_prediction",
    "run_ensemble",
    "run_experiment",
]
