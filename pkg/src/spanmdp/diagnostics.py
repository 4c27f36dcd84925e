"""Variance evaluators and numeric checks of the analysis' inequalities.

Every check is computed by exact linear algebra (or exhaustive path
enumeration for finite-horizon variances), so a failed record is a genuine
counterexample up to round-off rather than Monte Carlo noise.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EnumerationTooLarge, HypothesisViolated
from .mdp import ENUMERATION_CAP, Mdp, as_policy, check_vector, num_policies, \
    policy_kernel, policy_rewards
from .solvers import INFINITE, MixingMode, _solve, diameter, gain_bias_of_policy, \
    policy_class_mixing, policy_evaluation_discounted, solve_average_optimal, \
    solve_discounted_optimal

PASS_SLACK = 1e-9
PATH_CAP = 10 ** 6


@dataclass
class CheckRecord:
    name: str
    lhs: float
    rhs: float
    skipped: bool = False
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool | None:
        if self.skipped:
            return None
        return bool(self.margin >= -PASS_SLACK)

    @classmethod
    def skip(cls, name, note=""):
        return cls(name, math.nan, math.nan, skipped=True, note=note)


@dataclass
class AuditReport:
    instance_id: str = ""
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *records):
        self.records.extend(records)

    @property
    def failures(self):
        return [r for r in self.records if r.passed is False]

    @property
    def ok(self) -> bool:
        return not self.failures

    def sorted_records(self):
        return sorted(self.records, key=lambda r: r.name)

    def rows(self):
        for r in self.sorted_records():
            status = "SKIPPED" if r.skipped else ("PASS" if r.passed else "FAIL")
            yield [self.instance_id, r.name, repr(r.lhs), repr(r.rhs), repr(r.margin), status]

    def to_json(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not math.isfinite(x):
                return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
            return x

        recs = []
        for r in self.sorted_records():
            d = {k: clean(v) for k, v in asdict(r).items()}
            d["margin"] = clean(r.margin)
            d["pass"] = r.passed
            recs.append(d)
        return {"instance_id": self.instance_id,
                "metadata": {k: clean(v) for k, v in self.metadata.items()},
                "records": recs}


CSV_HEADER = ["instance_id", "check", "lhs", "rhs", "margin", "pass"]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in sorted(reports, key=lambda r: r.instance_id):
        w.writerows(rep.rows())
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_json() for r in sorted(reports, key=lambda r: r.instance_id)],
                      indent=2)


# -- variance evaluators ------------------------------------------------------------

def conditional_variance(m: Mdp, pi, v) -> np.ndarray:
    """One-step variance ``sum_s' P_pi(s, s') (v(s') - (P_pi v)(s))^2``."""
    v = check_vector(m, v, "v")
    P = policy_kernel(m, pi)
    mean = P @ v
    return np.maximum((P * (v[None, :] - mean[:, None]) ** 2).sum(axis=1), 0.0)


def _return_variance(P, r, gamma):
    M = np.eye(len(P)) - gamma * P
    V = _solve(M, r)
    V = V + _solve(M, r - M @ V)
    cv = np.maximum((P * (V[None, :] - (P @ V)[:, None]) ** 2).sum(axis=1), 0.0)
    M2 = np.eye(len(P)) - gamma ** 2 * P
    rhs = gamma ** 2 * cv
    sigma2 = _solve(M2, rhs)
    sigma2 = sigma2 + _solve(M2, rhs - M2 @ sigma2)
    return np.maximum(sigma2, 0.0), V, cv


def return_variance(m: Mdp, pi, gamma: float) -> np.ndarray:
    """Variance of the discounted return from each start state.

    Solves ``sigma2 = gamma^2 Var_P[V] + gamma^2 P_pi sigma2``.
    """
    sigma2, _, _ = _return_variance(policy_kernel(m, pi), policy_rewards(m, pi), gamma)
    return sigma2


def variance_bellman_residual(m: Mdp, pi, gamma: float, sigma2=None) -> float:
    P = policy_kernel(m, pi)
    V = policy_evaluation_discounted(m, pi, gamma)
    if sigma2 is None:
        sigma2 = return_variance(m, pi, gamma)
    cv = conditional_variance(m, pi, V)
    return float(np.max(np.abs(sigma2 - gamma ** 2 * cv - gamma ** 2 * P @ sigma2)))


def weighted_std_norm(m: Mdp, pi, gamma: float) -> float:
    """``|| (I - gamma P_pi)^{-1} sqrt(Var_{P_pi}[V_pi]) ||_inf``."""
    P = policy_kernel(m, pi)
    V = policy_evaluation_discounted(m, pi, gamma)
    cv = conditional_variance(m, pi, V)
    x = _solve(np.eye(m.num_states) - gamma * P, np.sqrt(cv))
    return float(np.max(np.abs(x)))


@dataclass(frozen=True, eq=False)
class VarianceReport:
    conditional_variance: np.ndarray
    return_variance: np.ndarray
    weighted_std_norm: float


def variance_report(m: Mdp, pi, gamma: float) -> VarianceReport:
    V = policy_evaluation_discounted(m, pi, gamma)
    return VarianceReport(conditional_variance(m, pi, V), return_variance(m, pi, gamma),
                          weighted_std_norm(m, pi, gamma))


def finite_horizon_return_variance(m: Mdp, pi, gamma: float, T: int, v_tail,
                                   cap: int = PATH_CAP) -> np.ndarray:
    """Variance of ``sum_{t<T} gamma^t R_t + gamma^T v_tail(S_T)`` by path enumeration.

    Every length-``T`` continuation ``(S_1, ..., S_T)`` is listed explicitly
    with its probability; nothing here reuses the linear-solve evaluators.
    """
    pi = as_policy(m, pi)
    v_tail = check_vector(m, v_tail, "v_tail")
    S = m.num_states
    if T < 0:
        raise ValueError("T must be non-negative")
    if S ** T > cap:
        raise EnumerationTooLarge(f"S^T = {S}^{T} exceeds the path cap {cap}")
    P = policy_kernel(m, pi)
    r = policy_rewards(m, pi)
    out = np.zeros(S)
    if T == 0:
        return out
    # paths[k, t] = S_{t+1} for path k
    paths = np.indices((S,) * T).reshape(T, -1).T
    discounts = gamma ** np.arange(T)
    for s0 in range(S):
        states = np.concatenate([np.full((len(paths), 1), s0), paths], axis=1)
        prob = np.prod(P[states[:, :-1], states[:, 1:]], axis=1)
        ret = (r[states[:, :-1]] * discounts).sum(axis=1) + gamma ** T * v_tail[states[:, -1]]
        mean = np.dot(prob, ret)
        out[s0] = max(np.dot(prob, (ret - mean) ** 2), 0.0)
    return out


# -- inequality checks ------------------------------------------------------------

def check_multistep_variance_identity(m: Mdp, pi, gamma: float, T: int, cap: int = PATH_CAP,
                                      tol: float = 1e-8):
    """Multi-step variance identity and the norm inequality derived from it.

    Returns two records: ``multistep_identity`` (lhs = max residual, rhs =
    ``tol``) and ``multistep_inequality``.
    """
    P = policy_kernel(m, pi)
    sigma2, V, _ = _return_variance(P, policy_rewards(m, pi), gamma)
    head = finite_horizon_return_variance(m, pi, gamma, T, V, cap)
    rhs = head + gamma ** (2 * T) * np.linalg.matrix_power(P, T) @ sigma2
    resid = float(np.max(np.abs(sigma2 - rhs)))
    ineq_rhs = float(np.max(head)) / (1 - gamma ** (2 * T))
    return [
        CheckRecord(f"multistep_identity_T{T}", resid, tol),
        CheckRecord(f"multistep_inequality_T{T}", float(np.max(sigma2)), ineq_rhs),
    ]


def check_horizon_inequality(H: int, gamma: float):
    """``(1 - gamma^{2H}) / (1 - gamma) >= (1 - e^{-2}) H >= 4H/5`` for ``gamma >= 1 - 1/H``."""
    failed = []
    if not (isinstance(H, (int, np.integer)) and H >= 1):
        failed.append(f"H must be an integer >= 1 (got {H!r})")
    elif not 1 - 1 / H <= gamma < 1:
        failed.append(f"need 1 - 1/H <= gamma < 1 (got H={H}, gamma={gamma})")
    if failed:
        raise HypothesisViolated(failed)
    lhs = sum(gamma ** k for k in range(2 * H))
    mid = (1 - math.exp(-2)) * H
    return [
        CheckRecord(f"horizon_inequality_H{H}_upper", mid, lhs),
        CheckRecord(f"horizon_inequality_H{H}_lower", 0.8 * H, mid),
    ]


def std_propagation_record(m: Mdp, pi, gamma: float, name: str) -> CheckRecord:
    """``gamma ||(I - gamma P)^-1 sqrt(Var_P[V])|| <= sqrt(2/(1-gamma)) sqrt(||sigma^2||)``."""
    sigma2 = return_variance(m, pi, gamma)
    lhs = gamma * weighted_std_norm(m, pi, gamma)
    rhs = math.sqrt(2 / (1 - gamma)) * math.sqrt(float(np.max(sigma2)))
    return CheckRecord(name, lhs, rhs)


def integer_span(H: float) -> int:
    """Span rounded up to an integer, at least 1 (round-off below 1e-9 is ignored)."""
    return max(1, math.ceil(H - 1e-9))


def _largest_feasible_T(S: int, T: int, cap: int) -> int:
    while T > 1 and S ** T > cap:
        T -= 1
    return T


def audit_instance(m: Mdp, gamma: float, instance_id: str = "", n_random_policies: int = 5,
                   seed: int = 0, max_T: int = 6, t_max: int = 100_000,
                   full: bool = True) -> AuditReport:
    """Evaluate every applicable inequality on ``m`` at discount ``gamma``.

    Checks whose enumeration is too large (or with ``full=False`` for the
    mixing-time sweeps) are recorded as skipped.
    """
    gb, q, pi_avg = solve_average_optimal(m)
    rho = float(gb.gain[0])
    H = gb.span_h
    Hc = integer_span(H)
    D = diameter(m)
    V, pi = solve_discounted_optimal(m, gamma)
    S = m.num_states

    rep = AuditReport(instance_id)
    rep.metadata = {"S": S, "A": m.num_actions, "gamma": gamma, "H": H, "H_int": Hc,
                    "D": D, "rho": rho}

    sigma2 = return_variance(m, pi, gamma)
    rep.add(CheckRecord("variance_bellman_residual",
                        variance_bellman_residual(m, pi, gamma, sigma2), 1e-10))
    rep.add(CheckRecord("return_variance_crude_bound", float(np.max(sigma2)),
                        1 / (1 - gamma) ** 2))
    rep.add(CheckRecord("value_span_bound", float(np.max(np.abs(V - rho / (1 - gamma)))), H))

    rep.add(std_propagation_record(m, pi, gamma, "std_propagation_optimal"))
    rng = np.random.default_rng(seed)
    for k in range(n_random_policies):
        rp = rng.integers(0, m.num_actions, size=S)
        rep.add(std_propagation_record(m, rp, gamma, f"std_propagation_random_{k}"))

    T = _largest_feasible_T(S, min(Hc, max_T), PATH_CAP)
    rep.add(*check_multistep_variance_identity(m, pi, gamma, 1, tol=1e-10))
    if T > 1:
        rep.add(*check_multistep_variance_identity(m, pi, gamma, T))

    if gamma >= 1 - 1 / Hc:
        rep.add(CheckRecord("optimal_policy_variance", float(np.max(sigma2)),
                            5 * Hc / (1 - gamma)))
        if S ** Hc <= PATH_CAP:
            head = finite_horizon_return_variance(m, pi, gamma, Hc, V)
            rep.add(CheckRecord("optimal_policy_horizon_variance", float(np.max(head)), 4 * Hc ** 2))
        rep.add(*check_horizon_inequality(Hc, gamma))
    else:
        rep.add(CheckRecord.skip("optimal_policy_variance", "gamma below 1 - 1/H"))

    if D == INFINITE:
        rep.add(CheckRecord.skip("span_le_diameter", "diameter infinite"))
    else:
        rep.add(CheckRecord("span_le_diameter", H, D))

    tau_star = tau_unif = math.nan
    if full and num_policies(m) <= ENUMERATION_CAP:
        tau_star = policy_class_mixing(m, MixingMode.OPTIMAL, t_max)
        tau_unif = policy_class_mixing(m, MixingMode.UNIFORM, t_max)
        for name, tau in (("span_le_8_tau_star", tau_star), ("span_le_8_tau_unif", tau_unif)):
            if tau == INFINITE:
                rep.add(CheckRecord.skip(name, "mixing time infinite"))
            else:
                rep.add(CheckRecord(name, H, 8 * tau))
        if tau_star != INFINITE and tau_unif != INFINITE:
            rep.add(CheckRecord("tau_star_le_tau_unif", tau_star, tau_unif))
    else:
        for name in ("span_le_8_tau_star", "span_le_8_tau_unif"):
            rep.add(CheckRecord.skip(name, "policy enumeration too large"))
    rep.metadata.update(tau_star=tau_star, tau_unif=tau_unif)
    return rep


def _audit_task(item):
    instance_id, m, gamma = item
    return audit_instance(m, gamma, instance_id)


def audit_sweep(items, workers: int = 1):
    """Audit ``(instance_id, mdp, gamma)`` triples, optionally in worker processes.

    Reports come back sorted by instance id whatever the completion order.
    """
    items = list(items)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_audit_task, items))
    else:
        reports = [_audit_task(item) for item in items]
    return sorted(reports, key=lambda r: r.instance_id)


def check_reduction(m: Mdp, pi, epsilon: float, H: float, epsilon_gamma: float,
                    name: str = "discount_reduction") -> CheckRecord:
    """Average-reward regret of an ``epsilon_gamma``-optimal discounted policy.

    With ``gamma = 1 - epsilon/H`` checks ``max_s (rho* - rho^pi) <= (8 + 3 eps_g / H) eps``.
    """
    failed = []
    if not 0 < epsilon <= 1:
        failed.append(f"0 < epsilon <= 1 (got {epsilon})")
    if not H > 0:
        failed.append(f"H > 0 (got {H})")
    if failed:
        raise HypothesisViolated(failed)
    gamma = 1 - epsilon / H
    if not 0 < gamma < 1:
        raise HypothesisViolated(f"gamma = 1 - epsilon/H = {gamma} must lie in (0, 1)")
    if not 0 <= epsilon_gamma <= 1 / (1 - gamma):
        raise HypothesisViolated(f"epsilon_gamma in [0, 1/(1-gamma)] (got {epsilon_gamma})")
    gb, _, _ = solve_average_optimal(m)
    if gb.span_h > H + 1e-9:
        raise HypothesisViolated(f"sp(h*) = {gb.span_h} exceeds H = {H}")
    V_star, _ = solve_discounted_optimal(m, gamma)
    V_pi = policy_evaluation_discounted(m, pi, gamma)
    subopt = float(np.max(V_star - V_pi))
    if subopt > epsilon_gamma + 1e-9 * max(1.0, float(np.max(V_star))):
        raise HypothesisViolated(
            f"policy is {subopt}-optimal for the discounted MDP, not {epsilon_gamma}-optimal")
    regret = float(np.max(gb.gain - gain_bias_of_policy(m, pi).gain))
    return CheckRecord(name, regret, (8 + 3 * epsilon_gamma / H) * epsilon)


def check_empirical_policy_variance(m: Mdp, result, H: float):
    """Variance bound for the output of perturbed empirical planning.

    ``result`` is an ``Alg1Result``.  The bound
    ``15 (H^2 + e1^2 + e2^2) / (H (1 - gamma))`` is checked twice: with the
    value errors measured against the perturbed empirical values (``_perturbed``)
    and against the unperturbed empirical values (``_unperturbed``).
    """
    gamma = result.gamma
    Hc = integer_span(H)
    pi_hat = result.policy
    r_tilde = result.perturbed_rewards
    P_hat = result.empirical.p_hat
    truth_p = m.with_rewards(r_tilde)
    lhs = float(np.max(return_variance(truth_p, pi_hat, gamma)))
    _, pi_star = solve_discounted_optimal(m, gamma)

    V_pihat = policy_evaluation_discounted(m, pi_hat, gamma)
    V_pistar = policy_evaluation_discounted(m, pi_star, gamma)
    records = []
    for label, model in (("perturbed", P_hat.with_rewards(r_tilde)), ("unperturbed", P_hat)):
        e1 = float(np.max(np.abs(V_pihat - policy_evaluation_discounted(model, pi_hat, gamma))))
        e2 = float(np.max(np.abs(V_pistar - policy_evaluation_discounted(model, pi_star, gamma))))
        rhs = 15 * (Hc ** 2 + e1 ** 2 + e2 ** 2) / (Hc * (1 - gamma))
        records.append(CheckRecord(f"empirical_policy_variance_{label}", lhs, rhs))
    return records


def error_bound_terms(m: Mdp, result, delta: float, epsilon: float, c1: float = 1.0):
    """Two high-probability value-error bounds, evaluated with constant ``c1``.

    These hold only with probability ``1 - delta`` for an unspecified
    constant, so the records are informational and meant to be aggregated
    into a satisfaction rate across trials.
    """
    gamma = result.gamma
    n = result.empirical.n
    S, A = m.num_states, m.num_actions
    L = math.log(S * A / ((1 - gamma) * delta * epsilon))
    model = result.empirical.p_hat.with_rewards(result.perturbed_rewards)
    truth_p = m.with_rewards(result.perturbed_rewards)
    _, pi_star = solve_discounted_optimal(m, gamma)
    out = []
    for label, pi, ref in (("pistar", pi_star, m), ("pihat", result.policy, truth_p)):
        V_true = policy_evaluation_discounted(m, pi, gamma)
        V_hat = policy_evaluation_discounted(model, pi, gamma)
        lhs = float(np.max(np.abs(V_hat - V_true)))
        V_ref = policy_evaluation_discounted(ref, pi, gamma)
        rhs = (gamma * math.sqrt(c1 * L / n) * weighted_std_norm(ref, pi, gamma)
               + c1 * gamma * L / ((1 - gamma) * n) * float(np.max(np.abs(V_ref)))
               + epsilon / 6)
        out.append(CheckRecord(f"error_bound_{label}", lhs, rhs))
    return out
