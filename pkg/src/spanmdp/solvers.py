"""Exact planning and structural quantities for tabular MDPs.

Everything here is deterministic linear algebra or contraction iterations
followed by an exact policy solve, so downstream diagnostics see solver
noise at the level of floating-point round-off only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    EnumerationTooLarge,
    NonConvergence,
    NotWeaklyCommunicating,
    NoUniqueStationary,
    SingularSystem,
)
from .mdp import ENUMERATION_CAP, Mdp, enumerate_policies, num_policies, \
    policy_kernel, policy_rewards, span
from .structure import is_weakly_communicating, period, reachability, recurrent_classes, \
    support_graph

INFINITE = math.inf
TIE_TOL = 1e-12
ARGMAX_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GainBias:
    gain: np.ndarray
    bias: np.ndarray

    @property
    def span_h(self) -> float:
        return span(self.bias)


@dataclass(frozen=True, eq=False)
class MixingReport:
    tau: float  # int-valued, or INFINITE
    stationary: np.ndarray | None
    iterations_used: int


class MixingMode(Enum):
    UNIFORM = "uniform"
    OPTIMAL = "optimal"


def _solve(M, b):
    try:
        x = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite solution")
    return x


def greedy(q: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Lowest-index action within ``tie_tol`` (relative to |max|) of the row maximum."""
    best = q.max(axis=1, keepdims=True)
    tol = tie_tol * np.maximum(1.0, np.abs(best))
    return np.argmax(q >= best - tol, axis=1).astype(np.int64)


# -- discounted ----------------------------------------------------------------

def policy_evaluation_discounted(m: Mdp, pi, gamma: float) -> np.ndarray:
    P = policy_kernel(m, pi)
    r = policy_rewards(m, pi)
    M = np.eye(m.num_states) - gamma * P
    V = _solve(M, r)
    # one refinement step keeps the residual at round-off level
    V = V + _solve(M, r - M @ V)
    if np.max(np.abs(M @ V - r), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(V))):
        raise SingularSystem("policy evaluation residual too large")
    return V


def q_values(m: Mdp, V: np.ndarray, gamma: float) -> np.ndarray:
    return m.rewards + gamma * m.transitions @ V


def bellman_operator(m: Mdp, V, gamma: float) -> np.ndarray:
    return q_values(m, np.asarray(V, dtype=float), gamma).max(axis=1)


def solve_discounted_optimal(m: Mdp, gamma: float, tol: float = 1e-10,
                             max_iters: int = 1_000_000):
    """Optimal discounted value and greedy policy.

    Value iteration runs until the Bellman residual is below
    ``tol * (1 - gamma) / (2 * gamma)`` (or the floating-point floor), then
    policy iteration from the greedy policy makes the answer exact.  Returns
    ``(V, pi)`` where ``V`` is the exact value of ``pi``.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    target = tol * (1 - gamma) / (2 * gamma)
    V = np.zeros(m.num_states)
    for it in range(max_iters):
        TV = bellman_operator(m, V, gamma)
        resid = np.max(np.abs(TV - V))
        V = TV
        floor = 64 * np.finfo(float).eps * max(1.0, np.max(np.abs(V)))
        if resid <= max(target, floor):
            break
        if it % 32 == 31:
            # certify the current greedy policy by exact evaluation
            pi = greedy(q_values(m, V, gamma))
            Vx = policy_evaluation_discounted(m, pi, gamma)
            qx = q_values(m, Vx, gamma)
            if np.all(qx.max(axis=1) <= Vx + TIE_TOL * np.maximum(1.0, np.abs(Vx))):
                return Vx, greedy(qx)
    else:
        raise NonConvergence(max_iters, float(resid))

    pi = greedy(q_values(m, V, gamma))
    for _ in range(10 * m.num_states * m.num_actions + 100):
        V = policy_evaluation_discounted(m, pi, gamma)
        q = q_values(m, V, gamma)
        # only switch on strict improvement, otherwise round-off can cycle
        improve = q.max(axis=1) > V + TIE_TOL * np.maximum(1.0, np.abs(V))
        if not improve.any():
            return V, greedy(q)
        new = pi.copy()
        new[improve] = greedy(q)[improve]
        pi = new
    raise NonConvergence(10 * m.num_states * m.num_actions + 100)


# -- average reward --------------------------------------------------------------

def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix."""
    n = len(P)
    M = np.vstack([(P - np.eye(n)).T, np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    nu, *_ = np.linalg.lstsq(M, b, rcond=None)
    nu = np.clip(nu, 0.0, None)
    return nu / nu.sum()


def limiting_matrix(P: np.ndarray) -> np.ndarray:
    """Cesaro limit ``P*`` via recurrent classes and absorption probabilities."""
    n = len(P)
    classes = recurrent_classes(P)
    Pstar = np.zeros((n, n))
    recurrent = np.zeros(n, dtype=bool)
    for C in classes:
        nu = stationary_distribution(P[np.ix_(C, C)])
        Pstar[np.ix_(C, C)] = nu[None, :]
        recurrent[C] = True
    T = np.flatnonzero(~recurrent)
    if len(T):
        inv = np.eye(len(T)) - P[np.ix_(T, T)]
        for C in classes:
            into = P[np.ix_(T, C)].sum(axis=1)
            absorb = _solve(inv, into)
            Pstar[np.ix_(T, C)] = absorb[:, None] * Pstar[C[0], C][None, :]
    return Pstar


def gain_bias_of_policy(m: Mdp, pi) -> GainBias:
    """Gain ``P* r`` and bias ``(I - P + P*)^{-1} (I - P*) r`` (shifted to min 0)."""
    P = policy_kernel(m, pi)
    r = policy_rewards(m, pi)
    Pstar = limiting_matrix(P)
    n = len(P)
    gain = Pstar @ r
    fundamental = np.eye(n) - P + Pstar
    bias = _solve(fundamental, r - gain)
    bias = bias - bias.min()
    return GainBias(gain, bias)


def solve_average_optimal(m: Mdp, tol: float = 1e-11, max_iters: int = 2_000_000):
    """Optimal gain, bias, q-function and policy of a weakly communicating MDP.

    Relative value iteration on the damped kernel ``(I + P) / 2`` with reward
    ``r / 2``; this leaves the bias unchanged and halves the gain.  Returns
    ``(GainBias, q, pi)`` with ``q(s, a) = r + P h - rho`` and ``h`` shifted so
    its minimum is 0.
    """
    if not is_weakly_communicating(m):
        raise NotWeaklyCommunicating("optimal average-reward control needs a weakly "
                                     "communicating MDP")
    S = m.num_states
    P2 = 0.5 * (m.transitions + np.eye(S)[:, None, :])
    r2 = 0.5 * m.rewards
    h = np.zeros(S)
    for it in range(max_iters):
        Th = (r2 + P2 @ h).max(axis=1)
        diff = Th - h
        h = Th - Th[0]
        if span(diff) <= tol / 4:
            break
    else:
        raise NonConvergence(max_iters, span(diff))
    rho = float(diff.max() + diff.min())  # 2 * midpoint undoes the damping
    q = m.rewards + m.transitions @ h - rho
    hq = q.max(axis=1)
    shift = hq.min()
    q = q - shift
    bias = hq - shift
    pi = greedy(q)
    return GainBias(np.full(S, rho), bias), q, pi


# -- structural quantities ----------------------------------------------------------

def _hitting_times(m: Mdp, target: int, tol: float, max_iters: int) -> np.ndarray:
    S = m.num_states
    keep = np.ones(S, dtype=bool)
    keep[target] = False
    Pk = m.transitions * keep[None, None, :]
    h = np.zeros(S)
    for _ in range(max_iters):
        new = 1.0 + (Pk @ h).min(axis=1)
        new[target] = 0.0
        resid = np.max(np.abs(new - h))
        h = new
        if resid <= tol:
            break
    else:
        raise NonConvergence(max_iters, float(resid))
    # polish by policy iteration on the stochastic shortest path problem
    pi = np.argmin(1.0 + Pk @ h, axis=1)
    for _ in range(10 * S * m.num_actions + 100):
        P = Pk[np.arange(S), pi]
        M = np.eye(S) - P
        rhs = np.ones(S)
        M[target] = 0.0
        M[target, target] = 1.0
        rhs[target] = 0.0
        try:
            exact = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            return h
        if not np.all(np.isfinite(exact)) or np.any(exact < -1e-9):
            return h
        cost = 1.0 + Pk @ exact
        cost[target] = 0.0
        better = cost.min(axis=1) < exact - 1e-12 * np.maximum(1.0, exact)
        better[target] = False
        if not better.any():
            return exact
        pi = np.where(better, np.argmin(cost, axis=1), pi)
    return h


def diameter(m: Mdp, horizon_cap: int = 1_000_000) -> float:
    """``max_{s1 != s2} min_pi E[hitting time of s2 from s1]``, or INFINITE."""
    S = m.num_states
    if S == 1:
        return 0.0
    reach = reachability(support_graph(m))
    if not reach.all():
        return INFINITE
    worst = 0.0
    for target in range(S):
        h = _hitting_times(m, target, 1e-9, horizon_cap)
        others = np.delete(h, target)
        worst = max(worst, float(others.max()))
    return worst


def mixing_time(m: Mdp, pi, t_max: int = 100_000) -> MixingReport:
    P = policy_kernel(m, pi)
    return chain_mixing_time(P, t_max)


def chain_mixing_time(P: np.ndarray, t_max: int = 100_000) -> MixingReport:
    classes = recurrent_classes(P)
    if len(classes) != 1:
        raise NoUniqueStationary(f"chain has {len(classes)} recurrent classes")
    C = classes[0]
    nu = np.zeros(len(P))
    nu[C] = stationary_distribution(P[np.ix_(C, C)])
    if period(P, C) > 1:
        # each cyclic subclass has mass 1/d, so the distance never drops below 2(1 - 1/d)
        return MixingReport(INFINITE, nu, 0)
    Pt = np.eye(len(P))
    for t in range(1, t_max + 1):
        Pt = Pt @ P
        if np.abs(Pt - nu[None, :]).sum(axis=1).max() <= 0.5:
            return MixingReport(t, nu, t)
    raise NonConvergence(t_max)


def optimal_policy_set(q: np.ndarray, tol: float = ARGMAX_TOL):
    """Per-state argmax action sets of ``q`` within absolute tolerance ``tol``."""
    best = q.max(axis=1, keepdims=True)
    return [tuple(int(a) for a in np.flatnonzero(row >= b - tol)) for row, b in zip(q, best)]


def policy_class_mixing(m: Mdp, mode, t_max: int = 100_000,
                        cap: int = ENUMERATION_CAP) -> float:
    """Uniform (sup over all policies) or optimal (inf over optimal policies) mixing time."""
    mode = MixingMode(mode) if not isinstance(mode, MixingMode) else mode
    if mode is MixingMode.UNIFORM:
        worst = 0.0
        for pi in enumerate_policies(m, cap):
            try:
                tau = mixing_time(m, pi, t_max).tau
            except NoUniqueStationary:
                return INFINITE
            if tau == INFINITE:
                return INFINITE
            worst = max(worst, tau)
        return worst

    if num_policies(m) > cap:
        raise EnumerationTooLarge(f"A^S exceeds the enumeration cap {cap}")
    _, q, _ = solve_average_optimal(m)
    best = INFINITE
    for actions in itertools.product(*optimal_policy_set(q)):
        try:
            tau = mixing_time(m, np.array(actions), t_max).tau
        except NoUniqueStationary:
            continue
        best = min(best, tau)
    return best
