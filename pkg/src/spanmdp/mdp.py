"""Tabular MDP container, validation and small linear-algebra helpers.

Transitions are stored as an ``(S, A, S)`` array ``P[s, a, s']`` and rewards as
an ``(S, A)`` array.  Policies are deterministic and represented as integer
arrays of length ``S``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyVector,
    EnumerationTooLarge,
    InvalidPolicy,
    RowNotStochastic,
    ValidationError,
    ValueOutOfRange,
)

ROW_SUM_TOL = 1e-12
ENUMERATION_CAP = 4096


@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite MDP ``(P, r)``; arrays are copied and frozen on construction."""

    transitions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        P = np.array(self.transitions, dtype=float)
        r = np.array(self.rewards, dtype=float)
        P.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transitions", P)
        object.__setattr__(self, "rewards", r)
        validate_mdp(self)

    @property
    def num_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transitions.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return (np.array_equal(self.transitions, other.transitions)
                and np.array_equal(self.rewards, other.rewards))

    def __repr__(self):
        return f"Mdp(S={self.num_states}, A={self.num_actions})"

    def with_rewards(self, rewards) -> Mdp:
        """Same kernel, new reward matrix (may exceed 1, see ``perturb_rewards``)."""
        return _unchecked(self.transitions, rewards)

    def with_transitions(self, transitions) -> Mdp:
        return Mdp(transitions, self.rewards)


def _unchecked(P, r) -> Mdp:
    # Bypasses the [0, 1] reward check; used for perturbed rewards in [0, 1 + xi].
    m = object.__new__(Mdp)
    P = np.array(P, dtype=float)
    r = np.array(r, dtype=float)
    P.setflags(write=False)
    r.setflags(write=False)
    object.__setattr__(m, "transitions", P)
    object.__setattr__(m, "rewards", r)
    _check_shapes(P, r)
    _check_rows(P)
    return m


def _check_shapes(P, r):
    if P.ndim != 3 or P.shape[0] != P.shape[2]:
        raise ValidationError(f"transitions must have shape (S, A, S), got {P.shape}")
    S, A, _ = P.shape
    if S < 1 or A < 1:
        raise ValidationError("need at least one state and one action")
    if r.shape != (S, A):
        raise ValidationError(f"rewards must have shape {(S, A)}, got {r.shape}")


def _check_rows(P):
    bad = np.argwhere(~np.isfinite(P) | (P < 0) | (P > 1))
    if len(bad):
        idx = tuple(int(i) for i in bad[0])
        raise ValueOutOfRange("transitions", idx, float(P[idx]))
    sums = P.sum(axis=2)
    dev = np.abs(sums - 1.0)
    if np.any(dev > ROW_SUM_TOL):
        s, a = (int(i) for i in np.argwhere(dev > ROW_SUM_TOL)[0])
        raise RowNotStochastic(s, a, float(sums[s, a]))


def validate_mdp(m: Mdp) -> None:
    """Raise if ``m`` violates a structural invariant; return None otherwise."""
    P, r = m.transitions, m.rewards
    _check_shapes(P, r)
    _check_rows(P)
    bad = np.argwhere(~np.isfinite(r) | (r < 0) | (r > 1))
    if len(bad):
        idx = tuple(int(i) for i in bad[0])
        raise ValueOutOfRange("rewards", idx, float(r[idx]))


def span(v) -> float:
    """Span semi-norm ``max(v) - min(v)``."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise EmptyVector("span of an empty vector")
    return float(v.max() - v.min())


def as_policy(m: Mdp, pi) -> np.ndarray:
    pi = np.asarray(pi)
    if pi.shape != (m.num_states,):
        raise InvalidPolicy(f"policy must have length {m.num_states}, got shape {pi.shape}")
    if not np.issubdtype(pi.dtype, np.integer):
        if not np.all(np.equal(np.mod(pi, 1), 0)):
            raise InvalidPolicy("policy entries must be integers")
        pi = pi.astype(np.int64)
    if np.any(pi < 0) or np.any(pi >= m.num_actions):
        raise InvalidPolicy(f"policy entries must lie in [0, {m.num_actions})")
    return pi.astype(np.int64)


def policy_kernel(m: Mdp, pi) -> np.ndarray:
    """``P_pi`` as an ``(S, S)`` matrix."""
    pi = as_policy(m, pi)
    return m.transitions[np.arange(m.num_states), pi]


def policy_rewards(m: Mdp, pi) -> np.ndarray:
    pi = as_policy(m, pi)
    return m.rewards[np.arange(m.num_states), pi]


def check_vector(m: Mdp, v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (m.num_states,):
        raise DimensionMismatch(f"{name} has shape {v.shape}, expected ({m.num_states},)")
    return v


def num_policies(m: Mdp) -> int:
    return m.num_actions ** m.num_states


def enumerate_policies(m: Mdp, cap: int = ENUMERATION_CAP):
    """Yield every deterministic policy in lexicographic order."""
    if num_policies(m) > cap:
        raise EnumerationTooLarge(
            f"A^S = {m.num_actions}^{m.num_states} exceeds the enumeration cap {cap}")
    for actions in itertools.product(range(m.num_actions), repeat=m.num_states):
        yield np.array(actions, dtype=np.int64)
