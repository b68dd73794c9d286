import numpy as np
import pytest

import ltvlq
from ltvlq import (DataEnsemble, DivergenceError, ExcitationSpec, InputError,
                   NonlinearStepper, TimeVaryingSystem, Trajectory,
                   build_lti_trajectory_data, check_richness, collect_ensemble,
                   generate_excitation)


class TestExcitation:
    def test_zero_amplitude_rejected(self):
        with pytest.raises(InputError):
            ExcitationSpec(amplitude=0.0)

    def test_same_seed_reproduces(self):
        for kind in ("gaussian-white", "sum-of-sinusoids", "piecewise-constant"):
            spec = ExcitationSpec(kind=kind, amplitude=2.0, seed=11)
            u1 = generate_excitation(spec, 2, 50)
            u2 = generate_excitation(spec, 2, 50)
            assert np.array_equal(u1, u2)
            assert u1.shape == (50, 2)

    def test_gaussian_sample_variance(self):
        spec = ExcitationSpec(kind="gaussian-white", amplitude=1.0, seed=3)
        u = generate_excitation(spec, 1, 1000)
        assert 0.85 <= float(np.var(u)) <= 1.15

    def test_bounded_kinds_respect_amplitude(self):
        for kind in ("sum-of-sinusoids", "piecewise-constant"):
            spec = ExcitationSpec(kind=kind, amplitude=0.7, seed=5)
            u = generate_excitation(spec, 3, 64)
            assert np.max(np.abs(u)) <= 0.7 + 1e-12

    def test_piecewise_dwell(self):
        spec = ExcitationSpec(kind="piecewise-constant", amplitude=1.0, seed=7, dwell=4)
        u = generate_excitation(spec, 1, 16)
        for blk in range(4):
            assert np.ptp(u[4 * blk:4 * blk + 4]) == 0.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(InputError):
            ExcitationSpec(kind="chirp")


def tiny_collection(gamma, sigma=0.0, seed=0, l=3, N=4):
    rng = np.random.default_rng(99)
    sys_ = TimeVaryingSystem(0.5 * rng.standard_normal((N, 2, 2)),
                             rng.standard_normal((N, 2, 1)))
    init = rng.standard_normal((l, 2))
    inputs = rng.standard_normal((l, N, 1))
    ens = collect_ensemble(sys_, init, inputs, gamma=gamma, noise_sigma=sigma, seed=seed)
    return sys_, init, inputs, ens


class TestCollect:
    def test_unit_discount_noise_free_matches_raw_samples(self):
        sys_, init, inputs, ens = tiny_collection(gamma=1.0)
        # independent rollout
        for j in range(3):
            x = init[j]
            for k in range(sys_.N):
                assert np.allclose(ens.D_seq[k][:2, j], x, atol=0)
                assert np.allclose(ens.D_seq[k][2:, j], inputs[j, k], atol=0)
                x = sys_.A_seq[k] @ x + sys_.B_seq[k] @ inputs[j, k]
            assert np.allclose(ens.X_seq[sys_.N][:, j], x, atol=0)

    def test_discount_scale_factor(self):
        _, _, _, e1 = tiny_collection(gamma=1.0)
        _, _, _, e2 = tiny_collection(gamma=0.25)
        # at k = 2 the scale is gamma^(k/2) = 0.25
        assert np.allclose(e2.X_seq[2], 0.25 * e1.X_seq[2], rtol=1e-12)
        assert np.allclose(e2.U_seq[2], 0.25 * e1.U_seq[2], rtol=1e-12)

    def test_scaling_consistency_across_gammas(self):
        _, _, _, e1 = tiny_collection(gamma=0.9)
        _, _, _, e2 = tiny_collection(gamma=0.45)
        alpha = 0.5
        for k in range(e1.N + 1):
            expect = e1.X_seq[k] * alpha ** (k / 2)
            denom = np.maximum(np.abs(expect), 1e-30)
            assert np.max(np.abs(e2.X_seq[k] - expect) / denom) < 1e-12

    def test_stacking_identity_bit_exact(self):
        _, _, _, ens = tiny_collection(gamma=0.8, sigma=0.1, seed=5)
        for k in range(ens.N):
            stacked = np.vstack([ens.X_seq[k], ens.U_seq[k]])
            assert np.array_equal(ens.D_seq[k], stacked)

    def test_noise_free_linear_consistency(self):
        sys_, _, _, ens = tiny_collection(gamma=0.9)
        cost = ltvlq.CostSpec.constant(np.eye(2), [[1.0]], np.eye(2), 0.9, sys_.N)
        for k in range(ens.N):
            E = ltvlq.stage_matrices(sys_, cost, k).E_k
            lhs = ens.X_seq[k + 1]
            rhs = E @ ens.D_seq[k]
            assert np.linalg.norm(lhs - rhs) <= 1e-10 * (1 + np.linalg.norm(lhs))

    def test_determinism(self):
        _, _, _, e1 = tiny_collection(gamma=0.9, sigma=0.05, seed=42)
        _, _, _, e2 = tiny_collection(gamma=0.9, sigma=0.05, seed=42)
        assert np.array_equal(e1.X_seq, e2.X_seq)
        assert np.array_equal(e1.U_seq, e2.U_seq)

    def test_noise_enters_states_only(self):
        _, _, inputs, ens = tiny_collection(gamma=1.0, sigma=0.5, seed=1)
        assert np.array_equal(ens.U_seq[0][:, 0], inputs[0, 0])

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergence_reports_experiment(self):
        plant = NonlinearStepper(step=lambda k, x, u: x * 1e300, n=1, m=1)
        with pytest.raises(DivergenceError) as err:
            collect_ensemble(plant, np.ones((2, 1)), np.zeros((2, 3, 1)), gamma=1.0)
        assert err.value.experiment == 0

    def test_example1_minimal_ensemble_is_rich(self):
        sys_, _ = ltvlq.example1_system()
        rng = np.random.default_rng(12)
        init = rng.standard_normal((5, 4))
        inputs = rng.standard_normal((5, 35, 1))
        ens = collect_ensemble(sys_, init, inputs, gamma=0.98)
        report = check_richness(ens)
        assert report.overall_pass
        assert report.required_rank == 5


class TestRichness:
    def test_too_few_experiments_fail_everywhere(self):
        sys_, _, _, _ = tiny_collection(gamma=1.0)
        rng = np.random.default_rng(0)
        ens = collect_ensemble(sys_, rng.standard_normal((2, 2)),
                               rng.standard_normal((2, 4, 1)), gamma=1.0)
        report = check_richness(ens)
        assert not report.overall_pass
        assert not np.any(report.passes)
        assert report.first_failure() == 0

    def test_duplicated_experiments_fail(self):
        rng = np.random.default_rng(1)
        sys_ = TimeVaryingSystem(0.5 * rng.standard_normal((4, 2, 2)),
                                 rng.standard_normal((4, 2, 1)))
        init = rng.standard_normal((3, 2))
        init[2] = init[1]
        inputs = rng.standard_normal((3, 4, 1))
        inputs[2] = inputs[1]
        ens = collect_ensemble(sys_, init, inputs, gamma=1.0)
        assert not check_richness(ens).overall_pass


class TestLtiTrajectoryData:
    def test_zero_input_cannot_excite(self):
        traj = Trajectory(np.array([[1.0], [2.0], [4.0]]), np.zeros((2, 1)))
        data = build_lti_trajectory_data(traj, 1, 1, k0=0)
        assert np.array_equal(data.L, [[1.0, 2.0], [0.0, 0.0]])
        assert np.array_equal(data.X_L, [[2.0, 4.0]])
        assert not check_richness(data).overall_pass

    def test_hand_simulated_excited_pair(self):
        # x+ = 2x + u from x0 = 1 with inputs (1, -1): states 1, 3, 5
        traj = Trajectory(np.array([[1.0], [3.0], [5.0]]),
                          np.array([[1.0], [-1.0]]))
        data = build_lti_trajectory_data(traj, 1, 1, k0=0)
        assert np.array_equal(data.L, [[1.0, 3.0], [1.0, -1.0]])
        assert np.array_equal(data.X_L, [[3.0, 5.0]])
        assert check_richness(data).overall_pass

    def test_shifted_column_identity(self):
        rng = np.random.default_rng(2)
        states = rng.standard_normal((8, 2))
        inputs = rng.standard_normal((7, 1))
        traj = Trajectory(states, inputs)
        data = build_lti_trajectory_data(traj, 2, 1, k0=2)
        for j in range(data.s):
            assert np.array_equal(data.X_L[:, j], states[2 + j + 1])

    def test_shift_identity_for_lti_plant(self):
        rng = np.random.default_rng(3)
        A = 0.5 * rng.standard_normal((2, 2))
        B = rng.standard_normal((2, 1))
        sys_ = TimeVaryingSystem.constant(A, B, 5)
        traj = ltvlq.simulate_open_loop(sys_, rng.standard_normal(2),
                                        rng.standard_normal((5, 1)))
        data = build_lti_trajectory_data(traj, 2, 1, k0=1)
        rhs = np.hstack([A, B]) @ data.L
        assert np.linalg.norm(data.X_L - rhs) <= 1e-10 * (1 + np.linalg.norm(rhs))

    def test_too_short_trajectory_rejected(self):
        traj = Trajectory(np.zeros((3, 2)), np.zeros((2, 1)))
        with pytest.raises(InputError):
            build_lti_trajectory_data(traj, 2, 1, k0=0)


class TestSerialization:
    def test_json_round_trip(self):
        _, _, _, ens = tiny_collection(gamma=0.9, sigma=0.01, seed=8)
        back = DataEnsemble.from_json(ens.to_json())
        assert np.allclose(back.X_seq, ens.X_seq, atol=0)
        assert np.allclose(back.U_seq, ens.U_seq, atol=0)
        assert back.gamma == ens.gamma
        assert back.seed == ens.seed

    def test_csv_export(self, tmp_path):
        _, _, _, ens = tiny_collection(gamma=1.0)
        ens.export_csv(tmp_path)
        assert (tmp_path / "D_000.csv").exists()
        assert (tmp_path / f"X_{ens.N:03d}.csv").exists()
        got = np.loadtxt(tmp_path / "D_000.csv", delimiter=",")
        assert np.allclose(got, ens.D_seq[0], rtol=1e-12)
