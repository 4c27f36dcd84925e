"""Seeded generative model and empirical kernels.

Randomness is counter-based so any sample can be regenerated in isolation.

Stream derivation
    ``key = mix64(mix64(mix64(mix64(seed) ^ trial) ^ s) ^ a)`` where
    ``mix64`` is the SplitMix64 finalizer and all arithmetic is modulo 2**64.
    A domain tag is XOR-ed into the seed so next-state draws and reward
    perturbations never share a stream.

Uniform for draw ``k``
    ``u_k = (mix64(key + (k + 1) * 0x9E3779B97F4A7C15) >> 11) * 2**-53``, a
    double in ``[0, 1)``.

Uniform to index
    the sampled state is the first ``s'`` whose cumulative probability
    strictly exceeds ``u_k``; if round-off leaves ``u_k`` at or above the
    final cumulative sum, the last state with positive probability is used.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import dumps_document, mdp_to_document
from .errors import IndexOutOfRange
from .mdp import Mdp

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TRANSITION_TAG = 0x0
PERTURBATION_TAG = 0x5EED_0F_9E27_5A11


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int, modulo 2**64."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, trial: int, s: int, a: int, tag: int = TRANSITION_TAG) -> int:
    h = mix64((seed ^ tag) & MASK64)
    h = mix64(h ^ (trial & MASK64))
    h = mix64(h ^ (s & MASK64))
    return mix64(h ^ (a & MASK64))


def uniforms(key: int, draws) -> np.ndarray:
    """Uniform doubles in [0, 1) for the given draw indices of one stream."""
    k = np.asarray(draws, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counter = np.uint64(key) + (k + np.uint64(1)) * np.uint64(GOLDEN)
    bits = _mix64_array(counter) >> np.uint64(11)
    return bits.astype(np.float64) * 2.0 ** -53


def inverse_cdf(row: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(row)
    idx = np.searchsorted(cdf, u, side="right")
    last = int(np.flatnonzero(row > 0)[-1])
    return np.minimum(idx, last)


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """Simulator access to a hidden MDP."""

    mdp: Mdp
    master_seed: int

    def _check(self, s, a):
        if not (0 <= s < self.mdp.num_states and 0 <= a < self.mdp.num_actions):
            raise IndexOutOfRange(f"(s={s}, a={a}) outside an MDP with "
                                  f"S={self.mdp.num_states}, A={self.mdp.num_actions}")

    def sample(self, s: int, a: int, trial: int, draws) -> np.ndarray:
        self._check(s, a)
        key = stream_key(self.master_seed, trial, s, a)
        return inverse_cdf(self.mdp.transitions[s, a], uniforms(key, draws))


def sample_next_state(g: GenerativeModel, s: int, a: int, trial: int, draw: int) -> int:
    if draw < 0:
        raise IndexOutOfRange("draw index must be non-negative")
    return int(g.sample(s, a, trial, [draw])[0])


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    counts: np.ndarray
    n: int
    p_hat: Mdp

    def to_document(self) -> bytes:
        doc = mdp_to_document(self.p_hat)
        doc["n"] = self.n
        doc["counts"] = self.counts.tolist()
        return dumps_document(doc)


def build_empirical_model(g: GenerativeModel, n: int, trial: int = 0) -> EmpiricalModel:
    """Draw ``n`` samples (draw indices ``0..n-1``) for every ``(s, a)``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    S, A = g.mdp.num_states, g.mdp.num_actions
    counts = np.zeros((S, A, S), dtype=np.int64)
    draws = np.arange(n)
    for s in range(S):
        for a in range(A):
            counts[s, a] = np.bincount(g.sample(s, a, trial, draws), minlength=S)
    counts.setflags(write=False)
    p_hat = Mdp(counts / n, g.mdp.rewards)
    return EmpiricalModel(counts, n, p_hat)
