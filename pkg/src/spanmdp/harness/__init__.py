"""Instance generators, experiment runner and command-line interface."""
from .experiment import ExperimentConfig, TrialResult, run_experiment
from .generators import generate_chain, generate_garnet

__all__ = ["ExperimentConfig", "TrialResult", "run_experiment", "generate_chain",
           "generate_garnet"]
