"""Tabular MDP toolkit for span-based sample complexity under a generative model.

Exact solvers for discounted and average-reward criteria, perturbed empirical
model-based planning and its average-reward reduction, and exact numeric
audits of the variance and span inequalities behind the sample-size bounds.
"""
from .algorithms import Alg1Config, Alg2Config, perturb_rewards, run_algorithm1, \
    run_algorithm2, sample_size
from .codec import codec_load, codec_save
from .generative import GenerativeModel, build_empirical_model, sample_next_state
from .mdp import Mdp, span, validate_mdp
from .solvers import INFINITE, diameter, gain_bias_of_policy, mixing_time, \
    policy_class_mixing, policy_evaluation_discounted, solve_average_optimal, \
    solve_discounted_optimal
from .structure import is_weakly_communicating, mec_decomposition

__version__ = "0.1.0"
