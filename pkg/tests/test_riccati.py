import numpy as np
import pytest

import ltvlq
from ltvlq import (ConditioningError, CostSpec, TimeVaryingSystem,
                   evaluate_cost, optimal_gains, qfunction_matrices,
                   simulate_closed_loop, solve_dre)
from conftest import random_system


def scalar_problem(a, b, q, r, qf, gamma, N):
    sys_ = TimeVaryingSystem.constant([[a]], [[b]], N)
    cost = CostSpec.constant([[q]], [[r]], [[qf]], gamma, N)
    return sys_, cost


class TestSolveDre:
    def test_pure_accumulation_without_control(self):
        sys_, cost = scalar_problem(1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2)
        P = solve_dre(sys_, cost)
        assert np.array_equal(P.P_seq.ravel(), [3.0, 2.0, 1.0])

    def test_scalar_one_step_hand_value(self):
        # P(0) = q + a^2 qf - (a b qf)^2 / (r + b^2 qf) = 1 + 1 - 1/2
        sys_, cost = scalar_problem(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1)
        P = solve_dre(sys_, cost)
        assert P[0][0, 0] == pytest.approx(1.5, abs=1e-15)

    def test_example1_initial_cost_matches_reported_value(self):
        sys_, cost = ltvlq.example1_system()
        P = solve_dre(sys_, cost)
        x0 = np.array([1.0, 0.0, 2.0, -1.0])
        assert x0 @ P[0] @ x0 == pytest.approx(19.4674, abs=1e-2)

    def test_terminal_matrix_is_final_weight(self):
        rng = np.random.default_rng(0)
        sys_, cost = random_system(rng, 3, 2, 4)
        P = solve_dre(sys_, cost)
        assert np.array_equal(P[sys_.N], cost.Qf)

    def test_recursion_residual(self):
        rng = np.random.default_rng(1)
        sys_, cost = random_system(rng, 3, 2, 6)
        P = solve_dre(sys_, cost)
        g = cost.gamma
        for k in range(sys_.N):
            A, B = sys_.A_seq[k], sys_.B_seq[k]
            M = cost.R_seq[k] + g * B.T @ P[k + 1] @ B
            rhs = (cost.Q_seq[k] + g * A.T @ P[k + 1] @ A
                   - g**2 * A.T @ P[k + 1] @ B @ np.linalg.solve(M, B.T @ P[k + 1] @ A))
            scale = max(np.linalg.norm(rhs), 1.0)
            assert np.linalg.norm(P[k] - rhs) <= 1e-10 * scale

    def test_psd_preservation(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            sys_, cost = random_system(rng, 3, 1, 5)
            P = solve_dre(sys_, cost)
            for Pk in P.P_seq:
                lam = np.linalg.eigvalsh(Pk)[0]
                assert lam >= -1e-10 * (1 + np.linalg.norm(Pk))

    def test_horizon_truncation_is_exact(self):
        rng = np.random.default_rng(3)
        sys_, cost = random_system(rng, 2, 1, 7)
        P = solve_dre(sys_, cost)
        for k in (2, 5):
            sub_sys = TimeVaryingSystem(sys_.A_seq[k:], sys_.B_seq[k:])
            sub_cost = CostSpec(cost.Q_seq[k:], cost.R_seq[k:], cost.Qf, cost.gamma)
            P_sub = solve_dre(sub_sys, sub_cost)
            assert np.array_equal(P[k], P_sub[0])

    def test_conditioning_guard(self):
        sys_ = TimeVaryingSystem.constant(np.eye(2), np.zeros((2, 2)), 2)
        cost = CostSpec.constant(np.eye(2), np.diag([1e4, 1e-11]), np.eye(2), 1.0, 2)
        with pytest.raises(ConditioningError):
            solve_dre(sys_, cost)


class TestOptimalGains:
    def test_zero_input_matrix_gives_zero_gains(self):
        sys_, cost = scalar_problem(0.8, 0.0, 1.0, 1.0, 1.0, 1.0, 4)
        P = solve_dre(sys_, cost)
        K = optimal_gains(sys_, cost, P)
        assert np.all(K.K_seq == 0)

    def test_scalar_hand_gain(self):
        sys_, cost = scalar_problem(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1)
        P = solve_dre(sys_, cost)
        K = optimal_gains(sys_, cost, P)
        assert K[0][0, 0] == pytest.approx(-0.5, abs=1e-15)

    def test_zero_weights_give_zero_gains(self):
        sys_ = TimeVaryingSystem.constant([[1.2]], [[1.0]], 5)
        cost = CostSpec.constant([[0.0]], [[1.0]], [[0.0]], 1.0, 5)
        P = solve_dre(sys_, cost)
        assert np.all(P.P_seq == 0)
        K = optimal_gains(sys_, cost, P)
        assert np.all(K.K_seq == 0)

    def test_bellman_consistency_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 3))
            N = int(rng.integers(1, 6))
            sys_, cost = random_system(rng, n, m, N)
            P = solve_dre(sys_, cost)
            K = optimal_gains(sys_, cost, P)
            x0 = rng.standard_normal(n)
            traj = simulate_closed_loop(sys_, K, x0)
            J = evaluate_cost(cost, traj)
            assert J == pytest.approx(x0 @ P[0] @ x0, rel=1e-9, abs=1e-12)


class TestQFunction:
    def test_initial_value_matrix_is_exact(self):
        rng = np.random.default_rng(5)
        sys_, cost = random_system(rng, 3, 2, 4)
        P = solve_dre(sys_, cost)
        qf = qfunction_matrices(sys_, cost, P)
        assert np.array_equal(qf.W_hat, P[0])

    def test_scalar_hand_matrix(self):
        sys_, cost = scalar_problem(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1)
        P = solve_dre(sys_, cost)
        qf = qfunction_matrices(sys_, cost, P)
        assert np.allclose(qf.G_hat_seq[0], [[2.0, 1.0], [1.0, 2.0]], atol=1e-15)

    def test_recovered_gain_matches_recursion_gain(self):
        rng = np.random.default_rng(6)
        sys_, cost = random_system(rng, 3, 2, 5)
        P = solve_dre(sys_, cost)
        qf = qfunction_matrices(sys_, cost, P)
        K = optimal_gains(sys_, cost, P)
        for k in range(sys_.N):
            _, G12, G22 = qf.blocks(k)
            Kk = -np.linalg.solve(G22, G12.T)
            assert np.linalg.norm(Kk - K[k]) <= 1e-12 * (1 + np.linalg.norm(K[k]))

    def test_argmin_stationarity(self):
        rng = np.random.default_rng(7)
        sys_, cost = random_system(rng, 3, 2, 4)
        P = solve_dre(sys_, cost)
        qf = qfunction_matrices(sys_, cost, P)
        K = optimal_gains(sys_, cost, P)
        for _ in range(10):
            k = int(rng.integers(0, sys_.N))
            x = rng.standard_normal(sys_.n)
            _, G12, G22 = qf.blocks(k)
            grad = 2 * (G12.T @ x + G22 @ (K[k] @ x))
            assert np.linalg.norm(grad) <= 1e-10 * (1 + np.linalg.norm(x))
