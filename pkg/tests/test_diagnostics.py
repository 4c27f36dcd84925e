import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spanmdp.algorithms import Alg1Config, run_algorithm1_detailed
from spanmdp.diagnostics import AuditReport, CheckRecord, audit_instance, audit_sweep, \
    check_empirical_policy_variance, check_horizon_inequality, \
    check_multistep_variance_identity, check_reduction, conditional_variance, \
    finite_horizon_return_variance, integer_span, return_variance, reports_to_csv, \
    reports_to_json, variance_bellman_residual, weighted_std_norm
from spanmdp.errors import EnumerationTooLarge, HypothesisViolated
from spanmdp.generative import GenerativeModel
from spanmdp.harness.generators import generate_chain, generate_garnet
from spanmdp.mdp import Mdp
from spanmdp.solvers import solve_average_optimal, solve_discounted_optimal

import helpers


def fork():
    """State 0 moves to 0 or 1 with equal probability; state 1 is absorbing."""
    return Mdp([[[0.5, 0.5]], [[0, 1]]], [[0], [0]])


class TestVariance:
    def test_deterministic_rows(self):
        assert np.all(conditional_variance(helpers.cycle(), [0, 0], [3.0, -1.0]) == 0)

    def test_fair_coin(self):
        assert conditional_variance(fork(), [0, 0], [0, 2])[0] == pytest.approx(1.0)

    def test_constant_vector(self):
        m = helpers.random_mdp(np.random.default_rng(0), 3, 1)
        assert np.allclose(conditional_variance(m, [0, 0, 0], np.full(3, 4.2)), 0, atol=1e-14)

    def test_deterministic_return(self):
        assert np.all(return_variance(helpers.cycle(), [0, 0], 0.9) == 0)
        assert variance_bellman_residual(helpers.ring3(), [0, 0, 0], 0.9) == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_bellman_residual(self, seed):
        m = generate_garnet(5, 3, 3, seed)
        pi = np.random.default_rng(seed).integers(3, size=5)
        assert variance_bellman_residual(m, pi, 0.95) <= 1e-10

    def test_matches_long_horizon_enumeration(self):
        m = Mdp([[[0.5, 0.5]], [[0.2, 0.8]]], [[0.0], [1.0]])
        sigma2 = return_variance(m, [0, 0], 0.5)
        # closing the horizon with the exact value leaves a variance tail of order 0.5^36
        V = np.linalg.solve(np.eye(2) - 0.5 * helpers.kernel(m, [0, 0]), [0.0, 1.0])
        approx = finite_horizon_return_variance(m, [0, 0], 0.5, 18, V)
        assert sigma2 == pytest.approx(approx, abs=1e-8)

    def test_weighted_norm_matches_neumann_series(self):
        m = helpers.random_mdp(np.random.default_rng(7), 3, 2)
        pi = np.array([0, 1, 1])
        P = helpers.kernel(m, pi)
        V = np.linalg.solve(np.eye(3) - 0.9 * P, m.rewards[np.arange(3), pi])
        x = np.sqrt(P @ V ** 2 - (P @ V) ** 2)
        oracle = helpers.neumann_weighted_norm(P, x, 0.9)
        assert weighted_std_norm(m, pi, 0.9) == pytest.approx(oracle, abs=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6), st.floats(0.05, 0.99))
    def test_variance_bounded_by_horizon(self, seed, gamma):
        m = helpers.random_mdp(np.random.default_rng(seed), 3, 1)
        sigma2 = return_variance(m, [0, 0, 0], gamma)
        assert np.all(sigma2 >= 0)
        assert np.all(sigma2 <= 1 / (1 - gamma) ** 2 + 1e-9)


class TestFiniteHorizon:
    def test_zero_horizon(self):
        assert np.all(finite_horizon_return_variance(fork(), [0, 0], 0.5, 0, [0, 2]) == 0)

    def test_deterministic(self):
        assert np.all(finite_horizon_return_variance(helpers.cycle(), [0, 0], 0.5, 1, [0, 7]) == 0)

    def test_one_step(self):
        out = finite_horizon_return_variance(fork(), [0, 0], 0.5, 1, [0, 2])
        assert out[0] == pytest.approx(0.25)

    def test_path_cap(self):
        with pytest.raises(EnumerationTooLarge):
            finite_horizon_return_variance(fork(), [0, 0], 0.5, 30, [0, 0])


class TestMultistep:
    def test_deterministic(self):
        recs = check_multistep_variance_identity(helpers.cycle(), [0, 0], 0.7, 3)
        assert recs[0].lhs == 0 and recs[1].lhs == 0

    def test_random_chain(self):
        m = helpers.random_mdp(np.random.default_rng(11), 3, 1)
        ident, ineq = check_multistep_variance_identity(m, [0, 0, 0], 0.6, 3)
        assert ident.lhs <= 1e-8 and ineq.passed

    def test_one_step(self):
        m = helpers.random_mdp(np.random.default_rng(12), 4, 1)
        ident, _ = check_multistep_variance_identity(m, [0] * 4, 0.9, 1, tol=1e-10)
        assert ident.passed


class TestHorizonInequality:
    def test_single_step(self):
        upper, lower = check_horizon_inequality(1, 0.0)
        assert upper.rhs == pytest.approx(1.0)
        assert upper.lhs == pytest.approx(1 - math.exp(-2))
        assert upper.passed and lower.passed

    def test_two_steps(self):
        upper, _ = check_horizon_inequality(2, 0.5)
        assert upper.rhs == pytest.approx(1.875)
        assert upper.passed

    @pytest.mark.parametrize("H, gamma", [(1, -0.1), (2, 0.3), (1.5, 0.9), (3, 1.0)])
    def test_out_of_regime(self, H, gamma):
        with pytest.raises(HypothesisViolated):
            check_horizon_inequality(H, gamma)


class TestAudit:
    def test_cycle(self):
        rep = audit_instance(helpers.cycle(), 0.5, "cycle")
        assert rep.ok and not rep.failures

    def test_self_loop(self):
        rep = audit_instance(helpers.self_loop(), 0.5, "loop")
        assert rep.ok
        for rec in rep.records:
            if rec.name.startswith(("std_propagation", "return_variance", "optimal_policy_variance")):
                assert rec.lhs == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_garnets(self, seed):
        m = generate_garnet(2 + seed % 4, 1 + seed % 3, 2, seed)
        H = integer_span(solve_average_optimal(m)[0].span_h)
        rep = audit_instance(m, 1 - 1 / (2 * H), f"g{seed}")
        assert rep.ok, [r.name for r in rep.failures]

    def test_serialization(self):
        rep = AuditReport("x", [CheckRecord("a", 1.0, 2.0), CheckRecord("b", 3.0, 2.0),
                                CheckRecord.skip("c", "infinite")])
        lines = reports_to_csv([rep]).splitlines()
        assert lines[0] == "instance_id,check,lhs,rhs,margin,pass"
        assert [ln.rsplit(",", 1)[1] for ln in lines[1:]] == ["PASS", "FAIL", "SKIPPED"]
        assert [r.name for r in rep.failures] == ["b"]
        assert json.loads(reports_to_json([rep]))


class TestReduction:
    @pytest.mark.parametrize("seed", range(5))
    def test_exact_discounted_optimum(self, seed):
        m = generate_garnet(4, 2, 2, seed)
        H = max(1.0, solve_average_optimal(m)[0].span_h)
        eps = 0.5
        _, pi = solve_discounted_optimal(m, 1 - eps / H)
        rec = check_reduction(m, pi, eps, H, 0.0)
        assert rec.passed and rec.rhs == pytest.approx(8 * eps)

    def test_one_policy(self):
        rec = check_reduction(helpers.cycle(), [0, 0], 0.3, 1.0, 0.0)
        assert rec.lhs == pytest.approx(0, abs=1e-12) and rec.passed

    def test_rejects_suboptimal_policy(self):
        m = helpers.one_state_two_actions()
        with pytest.raises(HypothesisViolated):
            check_reduction(m, [0], 0.5, 1.0, 0.0)

    def test_rejects_small_span_bound(self):
        with pytest.raises(HypothesisViolated):
            check_reduction(helpers.cycle(), [0, 0], 0.1, 0.25, 0.0)

    def test_algorithm2_output(self):
        m = generate_chain(5, 0.1, 0)
        H = solve_average_optimal(m)[0].span_h
        gamma = 1 - 0.3 / (12 * H)
        res = run_algorithm1_detailed(GenerativeModel(m, 4), Alg1Config(400, H, gamma))
        rec = check_reduction(m, res.policy, 0.3 / 12, H, H)
        assert rec.rhs == pytest.approx(11 * 0.3 / 12)
        assert rec.passed


class TestEmpiricalPolicyVariance:
    def test_chain(self):
        m = generate_chain(5, 0.1, 0)
        H = solve_average_optimal(m)[0].span_h
        gamma = 1 - 1 / (2 * integer_span(H))
        res = run_algorithm1_detailed(GenerativeModel(m, 1), Alg1Config(200, 1.0, gamma))
        recs = check_empirical_policy_variance(m, res, H)
        assert [r.name for r in recs] == ["empirical_policy_variance_perturbed",
                                              "empirical_policy_variance_unperturbed"]
        assert all(r.passed for r in recs)


class TestSweep:
    def test_parallel_matches_serial(self):
        items = [(f"g{s}", generate_garnet(3, 2, 2, s), 0.75) for s in (3, 1, 2)]
        serial = audit_sweep(items)
        parallel = audit_sweep(items, workers=2)
        assert [r.instance_id for r in serial] == ["g1", "g2", "g3"]
        assert reports_to_csv(serial) == reports_to_csv(parallel)
