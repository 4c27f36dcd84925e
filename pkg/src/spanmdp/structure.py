"""Graph structure of MDPs and Markov chains.

Maximal end components (used to decide weak communication), recurrent
classes of a fixed chain, and the period of a recurrent class.  All graphs
use strict positivity ``P > 0`` for edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .mdp import Mdp


@dataclass(frozen=True)
class EndComponent:
    states: frozenset
    actions: dict  # state -> tuple of allowed actions


@dataclass(frozen=True)
class MecDecomposition:
    components: tuple
    transient_states: frozenset

    def __len__(self):
        return len(self.components)


def strong_components(adjacency: np.ndarray) -> np.ndarray:
    """Label vector of strongly connected components of a boolean adjacency matrix."""
    _, labels = connected_components(csr_matrix(adjacency.astype(np.int8)),
                                     directed=True, connection="strong")
    return labels


def mec_decomposition(m: Mdp) -> MecDecomposition:
    S, A = m.num_states, m.num_actions
    support = m.transitions > 0
    allowed = np.ones((S, A), dtype=bool)
    active = np.ones(S, dtype=bool)

    while True:
        changed = False
        # an action is admissible only if its whole support stays among active states
        leaks = (support & ~active[None, None, :]).any(axis=2)
        drop = allowed & leaks
        if drop.any():
            allowed &= ~drop
            changed = True

        adj = np.zeros((S, S), dtype=bool)
        for s in np.flatnonzero(active):
            adj[s] = (support[s] & allowed[s][:, None]).any(axis=0)
        adj[~active] = False
        adj[:, ~active] = False
        labels = strong_components(adj)

        same = labels[:, None] == labels[None, :]
        # actions that can leave the SCC of their source state
        escapes = (support & ~same[:, None, :]).any(axis=2)
        drop = allowed & escapes
        if drop.any():
            allowed &= ~drop
            changed = True

        dead = active & ~allowed.any(axis=1)
        if dead.any():
            active &= ~dead
            changed = True
        if not changed:
            break

    groups = {}
    for s in np.flatnonzero(active):
        groups.setdefault(labels[s], []).append(int(s))
    components = []
    for states in sorted(groups.values(), key=min):
        acts = {s: tuple(int(a) for a in np.flatnonzero(allowed[s])) for s in states}
        components.append(EndComponent(frozenset(states), acts))
    transient = frozenset(int(s) for s in np.flatnonzero(~active))
    return MecDecomposition(tuple(components), transient)


def is_weakly_communicating(m: Mdp) -> bool:
    return len(mec_decomposition(m)) == 1


def recurrent_classes(P: np.ndarray):
    """Closed communicating classes of the chain ``P``, as sorted state lists."""
    adj = P > 0
    labels = strong_components(adj)
    classes = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        outside = np.ones(len(P), dtype=bool)
        outside[members] = False
        if not adj[np.ix_(members, outside)].any():
            classes.append([int(s) for s in members])
    classes.sort(key=min)
    return classes


def period(P: np.ndarray, states) -> int:
    """Period of an irreducible class: gcd over its edges of level(u) + 1 - level(v)."""
    states = list(states)
    inside = set(states)
    level = {states[0]: 0}
    frontier = [states[0]]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(P[u] > 0):
                v = int(v)
                if v in inside and v not in level:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    diffs = [level[u] + 1 - level[int(v)]
             for u in states for v in np.flatnonzero(P[u] > 0) if int(v) in inside]
    return reduce(math.gcd, (abs(d) for d in diffs), 0)


def reachability(adj: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of a boolean adjacency matrix."""
    n = len(adj)
    reach = adj.astype(bool) | np.eye(n, dtype=bool)
    while True:
        nxt = reach | ((reach.astype(np.int64) @ reach.astype(np.int64)) > 0)
        if np.array_equal(nxt, reach):
            return reach
        reach = nxt


def support_graph(m: Mdp) -> np.ndarray:
    """Boolean ``(S, S)`` adjacency: ``s -> s'`` iff some action reaches ``s'``."""
    return (m.transitions > 0).any(axis=1)
