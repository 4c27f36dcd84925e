"""Hand fixtures and brute-force oracles shared by the test modules.

The oracles deliberately avoid the package's solvers: they enumerate
policies, iterate matrix powers or sum series directly.
"""
import itertools

import numpy as np

from spanmdp.mdp import Mdp


def cycle():
    """Two states swapping deterministically, r = (0, 1)."""
    return Mdp([[[0, 1]], [[1, 0]]], [[0], [1]])


def self_loop(r=0.7):
    return Mdp([[[1.0]]], [[r]])


def one_state_two_actions():
    return Mdp([[[1.0], [1.0]]], [[0.2, 0.9]])


def two_mec():
    """State 0: action 0 self-loops, action 1 moves to the absorbing state 1."""
    return Mdp([[[1, 0], [0, 1]], [[0, 1], [0, 1]]], [[0.3, 0.0], [0.5, 0.5]])


def ring3():
    return Mdp(np.roll(np.eye(3), 1, axis=1)[:, None, :], np.zeros((3, 1)))


def disconnected_loops():
    return Mdp([[[1, 0]], [[0, 1]]], [[0.2], [0.9]])


def one_way():
    """0 -> 1 with 1 absorbing."""
    return Mdp([[[0, 1]], [[0, 1]]], [[0], [0]])


def random_mdp(rng, S, A, density=1.0):
    """Random kernel; each row keeps each entry with probability ``density``."""
    P = rng.random((S, A, S))
    mask = rng.random((S, A, S)) < density
    for s in range(S):
        for a in range(A):
            if not mask[s, a].any():
                mask[s, a, rng.integers(S)] = True
    P = np.where(mask, P + 1e-3, 0.0)
    P /= P.sum(axis=2, keepdims=True)
    for s in range(S):
        for a in range(A):
            k = int(np.argmax(P[s, a]))
            P[s, a, k] = 0.0
            P[s, a, k] = 1.0 - P[s, a].sum()
    return Mdp(P, rng.random((S, A)))


def all_policies(m):
    return [np.array(p) for p in itertools.product(range(m.num_actions), repeat=m.num_states)]


def kernel(m, pi):
    return m.transitions[np.arange(m.num_states), pi]


def closure(adj):
    n = len(adj)
    reach = np.eye(n, dtype=bool) | adj
    for _ in range(n):
        reach = reach | ((reach.astype(int) @ reach.astype(int)) > 0)
    return reach


def brute_force_weakly_communicating(m):
    """States recurrent under some policy must be mutually reachable in the support graph."""
    recurrent = np.zeros(m.num_states, dtype=bool)
    for pi in all_policies(m):
        reach = closure(kernel(m, pi) > 0)
        # s is recurrent iff every state it reaches can reach it back
        recurrent |= np.all(~reach | reach.T, axis=1)
    full = closure((m.transitions > 0).any(axis=1))
    R = np.flatnonzero(recurrent)
    return bool(len(R) and full[np.ix_(R, R)].all())


def brute_force_discounted(m, gamma):
    """Elementwise max over all deterministic policies of the exact value."""
    best = np.full(m.num_states, -np.inf)
    for pi in all_policies(m):
        P = kernel(m, pi)
        r = m.rewards[np.arange(m.num_states), pi]
        best = np.maximum(best, np.linalg.solve(np.eye(m.num_states) - gamma * P, r))
    return best


def cesaro_gain(m, pi, T=20000):
    P = kernel(m, pi)
    r = m.rewards[np.arange(m.num_states), pi]
    acc = np.zeros(m.num_states)
    v = r.copy()
    for _ in range(T):
        acc += v
        v = P @ v
    return acc / T


def brute_force_diameter(m):
    """Min over policies of exact hitting times, for policies that reach the target."""
    S = m.num_states
    worst = 0.0
    for target in range(S):
        best = np.full(S, np.inf)
        for pi in all_policies(m):
            P = kernel(m, pi).copy()
            keep = [s for s in range(S) if s != target]
            M = np.eye(S - 1) - P[np.ix_(keep, keep)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            h = np.linalg.solve(M, np.ones(S - 1))
            if np.any(h < 0):
                continue
            full = np.zeros(S)
            full[keep] = h
            best = np.minimum(best, full)
        worst = max(worst, float(np.delete(best, target).max()))
    return worst


def neumann_weighted_norm(P, x, gamma, terms=10_000):
    acc = np.zeros_like(x)
    v = x.copy()
    for _ in range(terms):
        acc += v
        v = gamma * (P @ v)
    return float(np.max(np.abs(acc)))
