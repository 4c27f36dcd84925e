"""Benchmark instance families."""
from __future__ import annotations

import numpy as np

from ..errors import GenerationFailed
from ..mdp import Mdp
from ..structure import is_weakly_communicating

LEFT, RIGHT = 0, 1


def _exact_rows(P: np.ndarray) -> np.ndarray:
    """Renormalize rows and push the residual round-off into each row's largest entry."""
    P = P / P.sum(axis=-1, keepdims=True)
    flat = P.reshape(-1, P.shape[-1])
    for row in flat:
        k = int(np.argmax(row))
        row[k] = 0.0
        row[k] = 1.0 - row.sum()
    return flat.reshape(P.shape)


def generate_chain(S: int, p_slip: float, seed: int = 0) -> Mdp:
    """Birth-death chain with LEFT/RIGHT actions (river-swim style).

    The intended move succeeds with probability ``1 - p_slip`` and goes the
    other way otherwise; moves off either end leave the state unchanged.
    ``LEFT`` at state 0 pays 0.05 and ``RIGHT`` at state ``S-1`` pays 1.
    The construction is deterministic; ``seed`` only exists so every
    generator shares a signature.
    """
    if S < 2:
        raise ValueError("chain needs S >= 2")
    if not 0 <= p_slip <= 0.5:
        raise ValueError("p_slip must lie in [0, 0.5]")
    P = np.zeros((S, 2, S))
    for s in range(S):
        left, right = max(s - 1, 0), min(s + 1, S - 1)
        P[s, LEFT, left] += 1 - p_slip
        P[s, LEFT, right] += p_slip
        P[s, RIGHT, right] += 1 - p_slip
        P[s, RIGHT, left] += p_slip
    r = np.zeros((S, 2))
    r[0, LEFT] = 0.05
    r[S - 1, RIGHT] = 1.0
    return Mdp(_exact_rows(P), r)


def generate_garnet(S: int, A: int, branching: int, seed: int = 0,
                    max_retries: int = 1000) -> Mdp:
    """Random MDP with ``branching`` successors per pair, regenerated until weakly communicating."""
    if not 1 <= branching <= S:
        raise ValueError("branching must lie in [1, S]")
    if A < 1:
        raise ValueError("A must be at least 1")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        P = np.zeros((S, A, S))
        for s in range(S):
            for a in range(A):
                succ = rng.choice(S, size=branching, replace=False)
                P[s, a, succ] = rng.gamma(1.0, size=branching) + 1e-12
        r = rng.uniform(0.0, 1.0, size=(S, A))
        m = Mdp(_exact_rows(P), r)
        if is_weakly_communicating(m):
            return m
    raise GenerationFailed(f"no weakly communicating instance after {max_retries} draws")


GENERATORS = {"chain": generate_chain, "garnet": generate_garnet}
