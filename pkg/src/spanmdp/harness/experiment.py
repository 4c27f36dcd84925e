"""Seeded Monte Carlo runs of the two planning algorithms.

Every trial is evaluated exactly on the true MDP.  Per-trial seeds are
``mix64(mix64(mix64(master_seed) ^ n_index) ^ trial)``, so growing the
``n`` grid or the trial count never changes earlier trials.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..algorithms import Alg1Config, Alg2Config, Theorem, run_algorithm1, run_algorithm2, \
    sample_size
from ..codec import load_document, load_mdp
from ..errors import ParseError
from ..generative import GenerativeModel, mix64
from ..mdp import Mdp
from ..solvers import gain_bias_of_policy, policy_evaluation_discounted, \
    solve_average_optimal, solve_discounted_optimal
from .generators import GENERATORS

log = logging.getLogger(__name__)

ALGORITHMS = ("ALG1", "ALG2")
CSV_HEADER = ["kind", "n", "trial", "seed", "gap", "epsilon_met", "success_rate",
              "median_gap", "state_gaps"]


@dataclass
class ExperimentConfig:
    instance: dict
    algorithm: str
    n_grid: list
    epsilon: float
    delta: float = 0.1
    gamma: float | None = None
    span_bound: float | None = None
    trials: int = 10
    master_seed: int = 0
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        self.algorithm = self.algorithm.upper()
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        self.n_grid = [int(n) for n in self.n_grid]
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n grid must be non-empty and strictly increasing")
        if self.algorithm == "ALG1" and self.gamma is None:
            raise ValueError("ALG1 needs gamma")

    @classmethod
    def from_document(cls, doc: dict) -> ExperimentConfig:
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ParseError(f"unknown config keys {sorted(unknown)}")
        for key in ("instance", "algorithm", "n_grid", "epsilon"):
            if key not in doc:
                raise ParseError(f"missing field {key!r}", key)
        return cls(**doc)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        return cls.from_document(load_document(Path(path)))


@dataclass
class TrialResult:
    n: int
    trial: int
    gap: float
    epsilon_met: bool
    seed: int
    runtime_ms: float = 0.0
    state_gaps: list = field(default_factory=list)


def build_instance(desc: dict) -> Mdp:
    """``{"path": ...}`` or ``{"generator": name, **params}``."""
    desc = dict(desc)
    if "path" in desc:
        return load_mdp(Path(desc["path"]))
    name = desc.pop("generator", None)
    if name not in GENERATORS:
        raise ParseError(f"unknown generator {name!r}", "instance.generator")
    return GENERATORS[name](**desc)


def trial_seed(master_seed: int, n_index: int, trial: int) -> int:
    return mix64(mix64(mix64(master_seed) ^ n_index) ^ trial)


@dataclass(frozen=True, eq=False)
class _Reference:
    """Exact optimal quantities of the true MDP, computed once per experiment."""

    rho: np.ndarray | None
    v_star: np.ndarray | None
    span_h: float


def reference_quantities(m: Mdp, cfg: ExperimentConfig) -> _Reference:
    gb, _, pi = solve_average_optimal(m)
    if cfg.algorithm == "ALG2":
        # exact gain of the optimal policy, free of relative-value-iteration round-off
        return _Reference(gain_bias_of_policy(m, pi).gain, None, gb.span_h)
    v_star, _ = solve_discounted_optimal(m, cfg.gamma)
    return _Reference(None, v_star, gb.span_h)


def _run_trial(m: Mdp, cfg: ExperimentConfig, ref: _Reference, n_index: int,
               trial: int) -> TrialResult:
    n = cfg.n_grid[n_index]
    seed = trial_seed(cfg.master_seed, n_index, trial)
    g = GenerativeModel(m, seed)
    start = time.perf_counter()
    if cfg.algorithm == "ALG2":
        H = cfg.span_bound if cfg.span_bound is not None else max(1.0, ref.span_h)
        pi = run_algorithm2(g, Alg2Config(n, cfg.epsilon, H, seed=seed, trial=trial))
        per_state = ref.rho - gain_bias_of_policy(m, pi).gain
    else:
        pi = run_algorithm1(g, Alg1Config(n, cfg.epsilon, cfg.gamma, seed=seed, trial=trial))
        per_state = ref.v_star - policy_evaluation_discounted(m, pi, cfg.gamma)
    elapsed = 1000 * (time.perf_counter() - start)
    gap = float(np.max(per_state))
    return TrialResult(n, trial, gap, bool(gap <= cfg.epsilon), seed, elapsed,
                       [float(x) for x in per_state])


def _trial_task(args):
    return _run_trial(*args)


def summarize(results, n_grid):
    out = []
    for n in n_grid:
        gaps = np.array([r.gap for r in results if r.n == n])
        if len(gaps):
            met = np.mean([r.epsilon_met for r in results if r.n == n])
            out.append((n, len(gaps), float(met), float(np.median(gaps))))
    return out


def results_to_csv(results, n_grid, failed: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    ordered = sorted(results, key=lambda r: (r.n, r.trial))
    for r in ordered:
        w.writerow(["TRIAL", r.n, r.trial, r.seed, repr(r.gap), int(r.epsilon_met), "", "",
                    ";".join(repr(x) for x in r.state_gaps)])
    for n, count, rate, med in summarize(ordered, n_grid):
        w.writerow(["SUMMARY", n, count, "", "", "", repr(rate), repr(med), ""])
    if failed is not None:
        w.writerow(["FAILED", "", "", "", "", "", "", "", failed])
    return buf.getvalue()


def theoretical_n(m: Mdp, cfg: ExperimentConfig, span_h: float, C: float = 1.0):
    """Sample size implied by the matching bound with constant ``C``, or None if out of regime."""
    H = cfg.span_bound if cfg.span_bound is not None else max(1.0, span_h)
    try:
        if cfg.algorithm == "ALG2":
            return sample_size(Theorem.TWO, H, None, cfg.epsilon, cfg.delta,
                               m.num_states, m.num_actions, C)
        return sample_size(Theorem.ONE, H, cfg.gamma, cfg.epsilon, cfg.delta,
                           m.num_states, m.num_actions, C)
    except Exception as exc:  # out-of-regime configurations are still runnable
        log.info("no theoretical sample size: %s", exc)
        return None


def run_experiment(cfg: ExperimentConfig, m: Mdp | None = None):
    """Run every ``(n, trial)`` pair; returns ``(results, csv_text)`` and writes ``cfg.output``."""
    if m is None:
        m = build_instance(cfg.instance)
    ref = reference_quantities(m, cfg)
    tasks = [(m, cfg, ref, i, t) for i in range(len(cfg.n_grid)) for t in range(cfg.trials)]
    results = []
    try:
        if cfg.workers > 1:
            with ProcessPoolExecutor(cfg.workers) as pool:
                for res in pool.map(_trial_task, tasks, chunksize=8):
                    results.append(res)
        else:
            for task in tasks:
                results.append(_trial_task(task))
    except Exception as exc:
        text = results_to_csv(results, cfg.n_grid, failed=f"{type(exc).__name__}: {exc}")
        if cfg.output:
            Path(cfg.output).write_text(text)
        raise
    text = results_to_csv(results, cfg.n_grid)
    if cfg.output:
        Path(cfg.output).write_text(text)
    return sorted(results, key=lambda r: (r.n, r.trial)), text


def loglog_slope(n_values, medians) -> float:
    """Least-squares slope of ``log(median)`` against ``log(n)``; NaN if a median is not positive."""
    medians = np.asarray(medians, dtype=float)
    if np.any(medians <= 0):
        return math.nan
    return float(np.polyfit(np.log(n_values), np.log(medians), 1)[0])


def config_to_json(cfg: ExperimentConfig) -> str:
    return json.dumps({k: getattr(cfg, k) for k in cfg.__dataclass_fields__}, indent=2)
