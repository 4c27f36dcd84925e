"""Perturbed empirical model-based planning and the average-reward reduction.

``run_algorithm1`` solves the discounted MDP built from ``n`` generative
samples per state-action pair with rewards perturbed by i.i.d.
``Uniform(0, xi)`` noise, ``xi = (1 - gamma) * epsilon / 6``.

``run_algorithm2`` handles the average-reward criterion by calling
``run_algorithm1`` with accuracy ``H`` and discount ``1 - epsilon / (12 H)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import HypothesisViolated, NegativePerturbation
from .generative import PERTURBATION_TAG, EmpiricalModel, GenerativeModel, \
    build_empirical_model, stream_key, uniforms
from .mdp import Mdp
from .solvers import solve_discounted_optimal


@dataclass(frozen=True)
class Alg1Config:
    n: int
    epsilon: float
    gamma: float
    seed: int = 0
    trial: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")


@dataclass(frozen=True)
class Alg2Config:
    n: int
    epsilon: float
    span_bound: float
    seed: int = 0
    trial: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not self.span_bound >= 1:
            raise ValueError("span_bound must be at least 1")


@dataclass(frozen=True, eq=False)
class Alg1Result:
    policy: np.ndarray
    empirical: EmpiricalModel
    perturbed_rewards: np.ndarray
    xi: float
    gamma: float
    values: np.ndarray  # optimal value of the perturbed empirical MDP


def perturbation_level(gamma: float, epsilon: float) -> float:
    return (1 - gamma) * epsilon / 6


def reduction_discount(epsilon: float, span_bound: float) -> float:
    return 1 - epsilon / (12 * span_bound)


def perturb_rewards(r, xi: float, seed: int, trial: int = 0) -> np.ndarray:
    """``r + Z`` with ``Z(s, a)`` i.i.d. ``Uniform(0, xi)``, one stream per ``(s, a)``."""
    if xi < 0:
        raise NegativePerturbation(f"perturbation level must be non-negative, got {xi}")
    r = np.asarray(r, dtype=float)
    S, A = r.shape
    z = np.empty_like(r)
    for s in range(S):
        for a in range(A):
            key = stream_key(seed, trial, s, a, tag=PERTURBATION_TAG)
            z[s, a] = uniforms(key, [0])[0]
    return r + xi * z


def run_algorithm1_detailed(g: GenerativeModel, cfg: Alg1Config) -> Alg1Result:
    # the generative model carries the sampling seed; cfg.seed drives the perturbation
    emp = build_empirical_model(g, cfg.n, cfg.trial)
    xi = perturbation_level(cfg.gamma, cfg.epsilon)
    r_tilde = perturb_rewards(g.mdp.rewards, xi, cfg.seed, cfg.trial)
    perturbed = emp.p_hat.with_rewards(r_tilde)
    V, pi = solve_discounted_optimal(perturbed, cfg.gamma, tol=1e-10 * (1 - cfg.gamma))
    return Alg1Result(pi, emp, r_tilde, xi, cfg.gamma, V)


def run_algorithm1(g: GenerativeModel, cfg: Alg1Config) -> np.ndarray:
    return run_algorithm1_detailed(g, cfg).policy


def algorithm1_config_for(cfg: Alg2Config) -> Alg1Config:
    return Alg1Config(n=cfg.n, epsilon=cfg.span_bound,
                      gamma=reduction_discount(cfg.epsilon, cfg.span_bound),
                      seed=cfg.seed, trial=cfg.trial)


def run_algorithm2(g: GenerativeModel, cfg: Alg2Config) -> np.ndarray:
    return run_algorithm1(g, algorithm1_config_for(cfg))


class Theorem(Enum):
    """Which sample-size bound: ONE for discounted planning, TWO for average reward."""

    ONE = "one"  # discounted
    TWO = "two"  # average reward


def sample_size(theorem, H: float, gamma: float | None, epsilon: float, delta: float,
                S: int, A: int, C: float = 1.0) -> int:
    """Per-pair sample size from the discounted (ONE) or average-reward (TWO) bound.

    ONE: ``C H / ((1-gamma)^2 eps^2) * log(S A / ((1-gamma) delta eps))``
    TWO: ``C H / eps^2 * log(S A / (delta eps))``
    """
    theorem = Theorem(theorem) if not isinstance(theorem, Theorem) else theorem
    failed = []
    if not H >= 1:
        failed.append(f"H >= 1 (got {H})")
    if not epsilon > 0:
        failed.append(f"epsilon > 0 (got {epsilon})")
    if not 0 < delta < 1:
        failed.append(f"0 < delta < 1 (got {delta})")
    if not C > 0:
        failed.append(f"C > 0 (got {C})")
    if S < 1 or A < 1:
        failed.append("S >= 1 and A >= 1")
    if theorem is Theorem.ONE:
        if gamma is None or not 0 < gamma < 1:
            failed.append(f"0 < gamma < 1 (got {gamma})")
        else:
            if not H <= 1 / (1 - gamma):
                failed.append(f"H <= 1/(1-gamma) (got H={H}, 1/(1-gamma)={1 / (1 - gamma)})")
            if not epsilon <= H:
                failed.append(f"epsilon <= H (got epsilon={epsilon}, H={H})")
    elif not epsilon <= 1:
        failed.append(f"epsilon <= 1 (got {epsilon})")
    if failed:
        raise HypothesisViolated(failed)

    if theorem is Theorem.ONE:
        horizon = 1 / (1 - gamma)
        value = C * H * horizon ** 2 / epsilon ** 2 * math.log(S * A * horizon / (delta * epsilon))
    else:
        value = C * H / epsilon ** 2 * math.log(S * A / (delta * epsilon))
    return max(1, math.ceil(value))


def mdp_from_result(result: Alg1Result) -> Mdp:
    """The perturbed empirical MDP ``(P_hat, r_tilde)`` that was solved."""
    return result.empirical.p_hat.with_rewards(result.perturbed_rewards)
