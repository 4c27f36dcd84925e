import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spanmdp.algorithms import Alg1Config, Alg2Config, Theorem, algorithm1_config_for, \
    perturb_rewards, perturbation_level, reduction_discount, run_algorithm1, \
    run_algorithm1_detailed, run_algorithm2, sample_size
from spanmdp.errors import HypothesisViolated, NegativePerturbation
from spanmdp.generative import GenerativeModel
from spanmdp.harness.generators import generate_garnet
from spanmdp.mdp import Mdp
from spanmdp.solvers import solve_discounted_optimal

import helpers


class TestPerturbation:
    def test_zero_level(self):
        r = np.random.default_rng(0).random((3, 2))
        assert np.array_equal(perturb_rewards(r, 0.0, 5), r)

    def test_level_and_range(self):
        xi = perturbation_level(0.9, 0.6)
        assert xi == pytest.approx(0.01)
        r = np.zeros((6, 3))
        z = perturb_rewards(r, xi, 17)
        assert np.all(z >= 0) and np.all(z < xi)
        assert len(np.unique(z)) == z.size

    def test_deterministic(self):
        r = np.ones((2, 2)) / 2
        assert np.array_equal(perturb_rewards(r, 0.1, 3, 1), perturb_rewards(r, 0.1, 3, 1))
        assert not np.array_equal(perturb_rewards(r, 0.1, 3, 1), perturb_rewards(r, 0.1, 3, 2))

    def test_negative(self):
        with pytest.raises(NegativePerturbation):
            perturb_rewards(np.zeros((1, 1)), -0.1, 0)


class TestAlgorithm1:
    def test_deterministic_kernel_recovers_optimum(self):
        # deterministic moves, rewards far apart relative to xi
        m = Mdp([[[1, 0, 0], [0, 1, 0]], [[0, 0, 1], [1, 0, 0]], [[0, 1, 0], [0, 0, 1]]],
                [[0.1, 0.4], [0.9, 0.0], [0.3, 0.6]])
        pi = run_algorithm1(GenerativeModel(m, 0), Alg1Config(3, 0.1, 0.9, seed=0))
        assert pi.tolist() == solve_discounted_optimal(m, 0.9)[1].tolist()

    def test_best_self_loop(self):
        pi = run_algorithm1(GenerativeModel(helpers.one_state_two_actions(), 4),
                            Alg1Config(1, 1.0, 0.9))
        assert pi.tolist() == [1]

    def test_solves_perturbed_empirical_model(self):
        m = generate_garnet(4, 2, 2, 1)
        res = run_algorithm1_detailed(GenerativeModel(m, 6), Alg1Config(20, 0.5, 0.8, seed=2))
        model = res.empirical.p_hat.with_rewards(res.perturbed_rewards)
        V, pi = solve_discounted_optimal(model, 0.8)
        assert np.array_equal(pi, res.policy)
        assert np.max(np.abs(res.perturbed_rewards - m.rewards)) < res.xi

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Alg1Config(0, 0.1, 0.9)
        with pytest.raises(ValueError):
            Alg1Config(1, 0.1, 1.0)


class TestAlgorithm2:
    @pytest.mark.parametrize("eps, H, expected", [(0.5, 5, 119 / 120), (1, 1, 11 / 12)])
    def test_reduction_discount(self, eps, H, expected):
        assert reduction_discount(eps, H) == pytest.approx(expected, abs=1e-15)

    def test_one_policy(self):
        pi = run_algorithm2(GenerativeModel(helpers.cycle(), 0), Alg2Config(5, 0.5, 1.0))
        assert pi.tolist() == [0, 0]

    @pytest.mark.parametrize("seed", range(4))
    def test_same_as_discounted_run(self, seed):
        m = generate_garnet(4, 2, 2, seed)
        cfg = Alg2Config(30, 0.4, 2.0, seed=seed, trial=3)
        direct = run_algorithm1_detailed(GenerativeModel(m, 99), algorithm1_config_for(cfg))
        assert np.array_equal(run_algorithm2(GenerativeModel(m, 99), cfg), direct.policy)
        assert direct.gamma == 1 - 0.4 / 24 and direct.xi == pytest.approx((1 - direct.gamma) * 2 / 6)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Alg2Config(5, 1.5, 2.0)
        with pytest.raises(ValueError):
            Alg2Config(5, 0.5, 0.5)


class TestSampleSize:
    def test_theorem_two(self):
        assert sample_size(Theorem.TWO, 1, None, 1, 0.5, 2, 2) == 3

    def test_theorem_one_formula(self):
        n = sample_size(Theorem.ONE, 2, 0.75, 1, 0.1, 3, 2)
        assert n == math.ceil(2 * 16 * math.log(6 * 4 / 0.1))

    def test_theorem_one_regime(self):
        with pytest.raises(HypothesisViolated) as info:
            sample_size(Theorem.ONE, 2.5, 0.5, 1, 0.1, 2, 2)
        assert any("1/(1-gamma)" in f for f in info.value.failed)

    def test_theorem_one_boundary_is_admissible(self):
        assert sample_size(Theorem.ONE, 2, 0.5, 1, 0.1, 2, 2) >= 1

    def test_collects_every_violation(self):
        with pytest.raises(HypothesisViolated) as info:
            sample_size(Theorem.TWO, 0.5, None, 2, 1.5, 2, 2)
        assert len(info.value.failed) == 3

    @settings(max_examples=50)
    @given(st.floats(1, 50), st.floats(0.01, 1), st.floats(0.01, 0.99), st.floats(0.1, 10))
    def test_monotone_in_constant(self, H, eps, delta, C):
        a = sample_size(Theorem.TWO, H, None, eps, delta, 3, 2, C)
        b = sample_size(Theorem.TWO, H, None, eps, delta, 3, 2, 2 * C)
        assert a <= b <= 2 * a
