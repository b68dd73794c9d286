import json

import numpy as np
import pytest

from ltvlq.cli import ExperimentConfig, main, run_certify, run_monte_carlo


@pytest.fixture
def small_plant(tmp_path):
    doc = {
        "n": 2, "m": 1, "N": 6,
        "A": [[0.9, 0.2], [-0.1, 0.8]],
        "B": [[0.0], [1.0]],
        "Q": [[1.0, 0.0], [0.0, 1.0]],
        "R": [[0.5]],
        "Qf": [[2.0, 0.0], [0.0, 2.0]],
        "gamma": 0.95,
    }
    path = tmp_path / "plant.json"
    path.write_text(json.dumps(doc))
    return str(path)


def write_config(tmp_path, **kwargs):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(kwargs))
    return str(path)


class TestModes:
    def test_riccati_mode_writes_bundle(self, tmp_path, small_plant):
        out = tmp_path / "ric"
        cfg = write_config(tmp_path, plant=small_plant)
        code = main(["riccati", "--config", cfg, "--out", str(out)])
        assert code == 0
        assert (out / "gains.json").exists()
        assert (out / "value_matrices.json").exists()
        assert (out / "dual_solution.json").exists()

    def test_model_based_and_data_modes_agree(self, tmp_path, small_plant):
        out_mb = tmp_path / "mb"
        out_mf = tmp_path / "mf"
        cfg = write_config(tmp_path, plant=small_plant, x0=[1.0, -1.0])
        assert main(["synth-model-based", "--config", cfg, "--out", str(out_mb)]) == 0
        assert main(["synth-data-ltv", "--config", cfg, "--out", str(out_mf),
                     "--seed", "5"]) == 0
        K1 = np.asarray(json.loads((out_mb / "gains.json").read_text()))
        K2 = np.asarray(json.loads((out_mf / "gains.json").read_text()))
        assert np.max(np.abs(K1 - K2)) < 1e-4

    def test_data_lti_mode(self, tmp_path, small_plant):
        out = tmp_path / "lti"
        cfg = write_config(tmp_path, plant=small_plant)
        assert main(["synth-data-lti", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "gains.json").exists()

    def test_lti_mode_rejects_time_varying_plant(self, tmp_path):
        cfg = write_config(tmp_path, plant="example1")
        assert main(["synth-data-lti", "--config", cfg]) == 2

    def test_rank_failure_exit_code(self, tmp_path, small_plant):
        cfg = write_config(tmp_path, plant=small_plant, l=2)  # n + m - 1
        assert main(["synth-data-ltv", "--config", cfg]) == 3

    def test_unknown_config_key_is_input_error(self, tmp_path):
        cfg = write_config(tmp_path, plnt="example1")
        assert main(["riccati", "--config", cfg]) == 2

    def test_missing_plant_file_is_input_error(self, tmp_path):
        cfg = write_config(tmp_path, plant=str(tmp_path / "nope.json"))
        assert main(["riccati", "--config", cfg]) == 2

    def test_invalid_mode_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["does-not-exist"])
        assert exc.value.code == 2

    def test_solver_failure_exit_code(self, tmp_path, small_plant, monkeypatch):
        import ltvlq.cli as cli_mod
        import ltvlq.ipm as ipm_mod
        real_solve = ipm_mod.solve

        def fake_solve(program, opts=None):
            res = real_solve(program, ipm_mod.SolverOptions(max_iterations=2))
            res.status = ipm_mod.STATUS_NUMERICAL
            return res

        monkeypatch.setattr(cli_mod.ipm, "solve", fake_solve)
        cfg = write_config(tmp_path, plant=small_plant)
        assert main(["synth-model-based", "--config", cfg]) == 4


class TestCertifyMode:
    def test_fresh_synthesis_bundle_passes(self, tmp_path, small_plant):
        out = tmp_path / "mb"
        cfg = write_config(tmp_path, plant=small_plant)
        assert main(["synth-model-based", "--config", cfg, "--out", str(out)]) == 0
        assert main(["certify", "--bundle", str(out)]) == 0
        doc = json.loads((out / "kkt_report.json").read_text())
        assert doc["passed"] is True
        gaps = json.loads((out / "gap_report.json").read_text())
        assert abs(gaps["duality_gap"]) <= 1e-4 * (1 + abs(gaps["primal_objective"]))

    def test_oracle_bundle_passes_tight_tolerance(self, tmp_path, small_plant):
        out = tmp_path / "ric"
        cfg = write_config(tmp_path, plant=small_plant, tolerance=1e-8)
        assert main(["riccati", "--config", cfg, "--out", str(out)]) == 0
        cfg2 = write_config(tmp_path, plant=small_plant, tolerance=1e-8,
                            bundle=str(out))
        assert main(["certify", "--config", cfg2]) == 0

    def test_corrupted_bundle_fails_naming_initial_slackness(
            self, tmp_path, small_plant):
        out = tmp_path / "mb"
        cfg = write_config(tmp_path, plant=small_plant)
        assert main(["synth-model-based", "--config", cfg, "--out", str(out)]) == 0
        doc = json.loads((out / "dual_solution.json").read_text())
        doc["W"] = (np.zeros_like(np.asarray(doc["W"]))).tolist()
        (out / "dual_solution.json").write_text(json.dumps(doc))
        assert main(["certify", "--bundle", str(out)]) == 5
        report = json.loads((out / "kkt_report.json").read_text())
        assert report["passed"] is False
        assert report["worst"] == "eq43"

    def test_missing_bundle_is_input_error(self, tmp_path):
        assert main(["certify", "--bundle", str(tmp_path / "missing")]) == 2


class TestMonteCarlo:
    def test_single_run_reports_zero_std(self, tmp_path):
        summary = run_monte_carlo(sigmas=[0.0], runs=1, l=5, seed=3,
                                  cfg=ExperimentConfig(mode="monte-carlo", n_jobs=1))
        assert summary.std_costs[0] == 0.0
        assert summary.failure_counts[0] == 0
        assert summary.run_count == 1

    def test_summary_serialization(self, tmp_path):
        out = tmp_path / "mc"
        summary = run_monte_carlo(sigmas=[0.0], runs=1, l=5, seed=3, out=out,
                                  cfg=ExperimentConfig(mode="monte-carlo", n_jobs=1))
        doc = json.loads((out / "monte_carlo.json").read_text())
        assert doc["run_count"] == 1
        assert doc["sigmas"] == [0.0]


class TestReproducibility:
    def test_identical_configs_reproduce_outputs(self, tmp_path, small_plant):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            cfg = write_config(tmp_path, plant=small_plant, seed=11)
            assert main(["synth-data-ltv", "--config", cfg, "--out", str(out)]) == 0
            outs.append(out)
        for name in ("gains.json", "costs.json", "trajectory.csv"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
