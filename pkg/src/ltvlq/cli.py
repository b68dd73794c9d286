"""Command-line front end: canned experiments, synthesis pipelines, certification.

Usage:  ltvlq <mode> [--config <path>] [--out <dir>] [--seed <int>]
               [--gamma <float>] [--l <int>] [--sigma <float>] [--runs <int>]

Modes: riccati, synth-model-based, synth-data-ltv, synth-data-lti, certify,
example1, example2, monte-carlo.  Set LTVLQ_LOG=info|debug for progress
output.  Exit codes: 0 success, 2 input error, 3 richness/rank or data
collection failure, 4 solver failure, 5 certification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys as _sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import assembly, certify, ensembles, ipm, riccati
from .errors import (CertificationError, DivergenceError, InputError,
                     LtvLqError, RankDeficiencyError)
from .systems import (CostSpec, NonlinearStepper, Trajectory,
                      TimeVaryingSystem, evaluate_cost, example2_plant,
                      load_plant, simulate_closed_loop,
                      simulate_nonlinear_closed_loop, simulate_open_loop)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RANK = 3
EXIT_SOLVER = 4
EXIT_CERT = 5

MODES = ("riccati", "synth-model-based", "synth-data-ltv", "synth-data-lti",
         "certify", "example1", "example2", "monte-carlo")


def _log_level() -> int:
    env = os.environ.get("LTVLQ_LOG", "").lower()
    return {"": 0, "0": 0, "info": 1, "1": 1, "debug": 2, "2": 2}.get(env, 1)


def _log(msg: str):
    if _log_level() >= 1:
        print(f"[ltvlq] {msg}")


@dataclass
class ExperimentConfig:
    """Resolved run configuration; every output bundle embeds one."""

    mode: str = "example1"
    plant: str | dict = "example1"
    out: str | None = None
    seed: int = 0
    gamma: float | None = None
    l: int | None = None
    sigma: float = 0.0
    runs: int = 100
    sigmas: list = field(default_factory=lambda: [0.0, 5e-4, 1e-3, 5e-3])
    x0: list | None = None
    bundle: str | None = None          # prior bundle dir, for certify
    excitation: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    tie_break: float = 1.0
    n_jobs: int = -1
    tolerance: float = 1e-6            # certification pass level

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def solver_options(self) -> ipm.SolverOptions:
        defaults = {"gap_tol": 1e-9, "feas_tol": 1e-7,
                    "verbosity": 1 if _log_level() >= 2 else 0}
        defaults.update(self.solver)
        return ipm.SolverOptions(**defaults)

    def to_jsonable(self) -> dict:
        doc = dataclasses.asdict(self)
        return doc


# ----------------------------------------------------------------------
# bundle writing
# ----------------------------------------------------------------------

def _write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)


def _write_trajectory_csv(path: Path, traj: Trajectory, series_prefix: str):
    """Tidy CSV: k,value,series."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,value,series\n")
        for k, row in enumerate(traj.states):
            for i, v in enumerate(row):
                fh.write(f"{k},{v:.12e},{series_prefix}_x{i + 1}\n")
        for k, row in enumerate(traj.inputs):
            for i, v in enumerate(row):
                fh.write(f"{k},{v:.12e},{series_prefix}_u{i + 1}\n")


def _dual_solution_doc(sol: assembly.DualSolution, Z, cfg: ExperimentConfig,
                       gamma: float, label: str) -> dict:
    return {
        "label": label,
        "plant": cfg.plant if isinstance(cfg.plant, str) else "inline",
        "gamma": gamma,
        "W": sol.W.tolist(),
        "G": [Gk.tolist() for Gk in sol.G_seq],
        "Z": np.asarray(Z).tolist(),
        "objective": sol.objective,
    }


class SolverFailure(LtvLqError):
    def __init__(self, result):
        super().__init__(f"solver returned status '{result.status}': {result.diagnostics}")
        self.result = result


def _solve_or_fail(program, opts) -> ipm.SolverResult:
    result = ipm.solve(program, opts)
    if result.status not in (ipm.STATUS_OPTIMAL, ipm.STATUS_MAX_ITER):
        raise SolverFailure(result)
    return result


def _default_excitation(cfg: ExperimentConfig, seed: int) -> ensembles.ExcitationSpec:
    fields = {"kind": "gaussian-white", "amplitude": 1.0, "seed": seed}
    fields.update(cfg.excitation)
    fields["seed"] = seed
    return ensembles.ExcitationSpec(**fields)


def _collect_linear(sys, cfg: ExperimentConfig, gamma, l, sigma, seed):
    rng = np.random.default_rng(seed)
    init = rng.standard_normal((l, sys.n))
    inputs = np.stack([
        ensembles.generate_excitation(_default_excitation(cfg, seed + 1 + j), sys.m, sys.N)
        for j in range(l)
    ])
    return ensembles.collect_ensemble(sys, init, inputs, gamma=gamma,
                                      noise_sigma=sigma, seed=seed)


# ----------------------------------------------------------------------
# pipelines
# ----------------------------------------------------------------------

def run_example1(gamma: float = 0.98, l: int = 5, sigma: float = 0.0,
                 seed: int = 0, out=None, cfg: ExperimentConfig | None = None) -> dict:
    """Full benchmark run: exact recursion, model-based SDP, data-driven SDP."""
    cfg = cfg or ExperimentConfig(mode="example1", gamma=gamma, l=l,
                                  sigma=sigma, seed=seed, out=out)
    sys_, cost = load_plant("example1")
    if gamma != cost.gamma:
        cost = CostSpec(cost.Q_seq, cost.R_seq, cost.Qf, gamma)
    x0 = np.array(cfg.x0 if cfg.x0 else [1.0, 0.0, 2.0, -1.0])
    opts = cfg.solver_options()
    Z = np.eye(sys_.n)
    bundle = {"config": cfg.to_jsonable(), "gamma": gamma, "l": l,
              "sigma": sigma, "seed": seed}

    _log(f"example1: exact recursion (gamma={gamma})")
    P = riccati.solve_dre(sys_, cost)
    K_ric = riccati.optimal_gains(sys_, cost, P)
    traj_ric = simulate_closed_loop(sys_, K_ric, x0)
    bundle["J_riccati"] = evaluate_cost(cost, traj_ric)
    bundle["riccati"] = {"P0": P[0].tolist(),
                         "gains": K_ric.K_seq.tolist()}

    _log("example1: model-based synthesis")
    prog_mb = assembly.assemble_model_based(sys_, cost, Z, tie_break=cfg.tie_break)
    res_mb = _solve_or_fail(prog_mb, opts)
    sol_mb = assembly.extract_dual_solution(prog_mb.layout, res_mb.y, Z)
    K_mb = assembly.gains_from_dual(sol_mb)
    traj_mb = simulate_closed_loop(sys_, K_mb, x0)
    bundle["J_model_based"] = evaluate_cost(cost, traj_mb)
    cert = certify.build_kkt_certificate(sys_, cost, Z)
    report_mb = certify.check_kkt(sys_, cost, Z, sol_mb, cert, tolerance=cfg.tolerance)
    recon = certify.reconstruct_primal(sys_, cost, K_mb, Z)
    gap_mb = certify.duality_gap(recon.objective, sol_mb, Z)
    bundle["model_based"] = {
        "status": res_mb.status, "iterations": res_mb.iterations,
        "wall_time": res_mb.wall_time, "gap": res_mb.gap,
        "duality_gap": gap_mb, "kkt_passed": report_mb.passed,
        "gains": K_mb.K_seq.tolist(),
    }

    _log(f"example1: data-driven synthesis (l={l}, sigma={sigma})")
    ensemble = _collect_linear(sys_, cfg, gamma, l, sigma, seed)
    prog_mf = assembly.assemble_model_free_ltv(ensemble, cost, tie_break=cfg.tie_break)
    res_mf = _solve_or_fail(prog_mf, opts)
    sol_mf = assembly.extract_dual_solution(prog_mf.layout, res_mf.y)
    K_mf = assembly.gains_from_dual(sol_mf)
    traj_mf = simulate_closed_loop(sys_, K_mf, x0)
    bundle["J_model_free"] = evaluate_cost(cost, traj_mf)
    bundle["model_free"] = {
        "status": res_mf.status, "iterations": res_mf.iterations,
        "wall_time": res_mf.wall_time, "gap": res_mf.gap,
        "gains": K_mf.K_seq.tolist(),
    }
    bundle["gain_agreement"] = {
        "model_based": float(max(np.linalg.norm(K_mb[k] - K_ric[k]) for k in range(sys_.N))),
        "model_free": float(max(np.linalg.norm(K_mf[k] - K_ric[k]) for k in range(sys_.N))),
    }

    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "config.json", cfg.to_jsonable())
        _write_json(outdir / "costs.json", {
            "J_riccati": bundle["J_riccati"],
            "J_model_based": bundle["J_model_based"],
            "J_model_free": bundle["J_model_free"],
            "x0": x0.tolist(),
        })
        _write_json(outdir / "gains_riccati.json", K_ric.K_seq.tolist())
        _write_json(outdir / "gains_model_based.json", K_mb.K_seq.tolist())
        _write_json(outdir / "gains_model_free.json", K_mf.K_seq.tolist())
        _write_trajectory_csv(outdir / "trajectory_model_based.csv", traj_mb, "mb")
        _write_trajectory_csv(outdir / "trajectory_model_free.csv", traj_mf, "mf")
        _write_json(outdir / "dual_solution.json",
                    _dual_solution_doc(sol_mb, Z, cfg, gamma, "model-based"))
        with open(outdir / "kkt_report.json", "w", encoding="utf-8") as fh:
            fh.write(report_mb.to_json())
        res_mb.write_iteration_log(outdir / "solver_log_model_based.csv")
        res_mf.write_iteration_log(outdir / "solver_log_model_free.csv")
    bundle["_objects"] = {
        "sys": sys_, "cost": cost, "P": P, "K_ric": K_ric, "K_mb": K_mb,
        "K_mf": K_mf, "sol_mb": sol_mb, "sol_mf": sol_mf,
        "res_mb": res_mb, "res_mf": res_mf, "prog_mf": prog_mf,
        "report_mb": report_mb,
    }
    return bundle


def _open_loop_divergence_step(plant: NonlinearStepper, x0, threshold=1e3,
                               max_steps=40):
    """First step at which the uncontrolled plant exceeds the norm threshold."""
    x = np.asarray(x0, dtype=float)
    u0 = np.zeros(plant.m)
    for k in range(max_steps):
        x = np.asarray(plant.step(k, x, u0), dtype=float)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > threshold:
            return k + 1
    return None


def run_example2(seed: int = 0, out=None, cfg: ExperimentConfig | None = None) -> dict:
    """Data-driven stabilization of the nonlinear benchmark plant.

    Collects a small-amplitude ensemble near the origin; on divergence the
    collection retries with a smaller amplitude and a fresh seed, up to
    five attempts.
    """
    cfg = cfg or ExperimentConfig(mode="example2", seed=seed, out=out)
    plant, cost = example2_plant()
    n, m, N = plant.n, plant.m, cost.N
    l = cfg.l or (n + m)
    x0 = np.array(cfg.x0 if cfg.x0 else [-0.5, 2.0, -0.5])
    opts = cfg.solver_options()

    amplitude = float(cfg.excitation.get("amplitude", 0.01))
    res = None
    last_exc = None
    for attempt in range(5):
        try:
            rng = np.random.default_rng(seed + 1000 * attempt)
            init = amplitude * rng.standard_normal((l, n))
            inputs = amplitude * rng.standard_normal((l, N, m))
            ensemble = ensembles.collect_ensemble(
                plant, init, inputs, gamma=cost.gamma, noise_sigma=cfg.sigma,
                seed=seed + 1000 * attempt)
            prog = assembly.assemble_model_free_ltv(ensemble, cost,
                                                    tie_break=cfg.tie_break)
            res = _solve_or_fail(prog, opts)
            break
        except DivergenceError as exc:
            last_exc = exc
            amplitude *= 0.5
            _log(f"example2: collection diverged, retrying with amplitude {amplitude}")
        except SolverFailure as exc:
            last_exc = exc
            _log("example2: synthesis failed, retrying with fresh data")
    if res is None:
        if isinstance(last_exc, SolverFailure):
            raise last_exc
        raise DivergenceError("data collection kept diverging after 5 attempts")

    sol = assembly.extract_dual_solution(prog.layout, res.y)
    gains = assembly.gains_from_dual(sol)
    traj = simulate_nonlinear_closed_loop(plant, gains, x0)
    ratio = float(np.linalg.norm(traj.states[-1]) / np.linalg.norm(x0))
    div_step = _open_loop_divergence_step(plant, x0)
    bundle = {
        "config": cfg.to_jsonable(),
        "seed": seed,
        "amplitude": amplitude,
        "boundedness_ratio": ratio,
        "closed_loop_cost": evaluate_cost(cost, traj),
        "open_loop_divergence_step": div_step,
        "solver": {"status": res.status, "iterations": res.iterations,
                   "gap": res.gap, "wall_time": res.wall_time},
    }
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "config.json", cfg.to_jsonable())
        _write_json(outdir / "summary.json",
                    {k: v for k, v in bundle.items() if k != "_objects"})
        _write_json(outdir / "gains.json", gains.K_seq.tolist())
        _write_trajectory_csv(outdir / "trajectory.csv", traj, "nl")
        res.write_iteration_log(outdir / "solver_log.csv")
    bundle["_objects"] = {"gains": gains, "traj": traj, "sol": sol,
                          "res": res, "ensemble": ensemble}
    return bundle


@dataclass(frozen=True)
class MonteCarloSummary:
    """Noise-sweep statistics over repeated data-driven synthesis runs."""

    sigmas: list
    mean_costs: list
    std_costs: list
    failure_counts: list
    mean_wall_times: list
    run_count: int
    seed: int

    def to_jsonable(self) -> dict:
        return dataclasses.asdict(self)


def _monte_carlo_single(sigma: float, run_seed: int, gamma: float, l: int,
                        amplitude: float, tie_break: float, solver_kwargs: dict):
    """One collection + synthesis + evaluation; returns (cost, time, failure)."""
    from .systems import example1_system  # local import keeps workers lean
    sys_, cost = example1_system(gamma)
    x0 = np.array([1.0, 0.0, 2.0, -1.0])
    t0 = time.perf_counter()
    try:
        rng = np.random.default_rng(run_seed)
        init = amplitude * rng.standard_normal((l, sys_.n))
        inputs = amplitude * rng.standard_normal((l, sys_.N, sys_.m))
        ensemble = ensembles.collect_ensemble(sys_, init, inputs, gamma=gamma,
                                              noise_sigma=sigma, seed=run_seed)
        prog = assembly.assemble_model_free_ltv(ensemble, cost, tie_break=tie_break)
        res = ipm.solve(prog, ipm.SolverOptions(**solver_kwargs))
        if res.status not in (ipm.STATUS_OPTIMAL, ipm.STATUS_MAX_ITER):
            return None, time.perf_counter() - t0, "solver"
        sol = assembly.extract_dual_solution(prog.layout, res.y)
        gains = assembly.gains_from_dual(sol)
        traj = simulate_closed_loop(sys_, gains, x0)
        J = evaluate_cost(cost, traj)
        if not np.isfinite(J):
            return None, time.perf_counter() - t0, "divergence"
        return J, time.perf_counter() - t0, None
    except (DivergenceError, RankDeficiencyError, CertificationError) as exc:
        return None, time.perf_counter() - t0, type(exc).__name__


def run_monte_carlo(sigmas=None, runs: int = 100, l: int = 5, seed: int = 0,
                    gamma: float = 1.0, out=None,
                    cfg: ExperimentConfig | None = None) -> MonteCarloSummary:
    """Repeat the data-driven pipeline over a noise-level sweep.

    Run r reuses the same seed at every noise level (common random numbers),
    so each run sees one fixed noise direction whose scale grows with sigma;
    the per-level means then compare like for like.
    """
    cfg = cfg or ExperimentConfig(mode="monte-carlo", seed=seed, runs=runs, l=l)
    sigmas = list(sigmas if sigmas is not None else cfg.sigmas)
    if runs < 1:
        raise InputError("runs must be >= 1")
    solver_kwargs = {"gap_tol": 1e-9, "feas_tol": 1e-7}
    solver_kwargs.update(cfg.solver)
    amplitude = float(cfg.excitation.get("amplitude", 3.0))
    jobs = [(si, s, seed + r) for si, s in enumerate(sigmas) for r in range(runs)]

    from joblib import Parallel, delayed
    results = Parallel(n_jobs=cfg.n_jobs)(
        delayed(_monte_carlo_single)(s, rs, gamma, l, amplitude, cfg.tie_break,
                                     solver_kwargs)
        for (_, s, rs) in jobs)

    mean_costs, std_costs, fails, times = [], [], [], []
    for si in range(len(sigmas)):
        chunk = [results[si * runs + r] for r in range(runs)]
        costs = np.array([c for c, _, f in chunk if f is None and c is not None])
        nfail = sum(1 for _, _, f in chunk if f is not None)
        mean_costs.append(float(np.mean(costs)) if costs.size else float("nan"))
        std_costs.append(float(np.std(costs)) if costs.size else float("nan"))
        fails.append(nfail)
        times.append(float(np.mean([t for _, t, _ in chunk])))
        _log(f"monte-carlo sigma={sigmas[si]}: mean J={mean_costs[-1]:.4f} "
             f"failures={nfail}")
    summary = MonteCarloSummary(sigmas=sigmas, mean_costs=mean_costs,
                                std_costs=std_costs, failure_counts=fails,
                                mean_wall_times=times, run_count=runs, seed=seed)
    if out:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "config.json", cfg.to_jsonable())
        _write_json(outdir / "monte_carlo.json", summary.to_jsonable())
    return summary


def run_certify(cfg: ExperimentConfig):
    """Re-verify a previously written synthesis bundle."""
    if not cfg.bundle:
        raise InputError("certify mode needs 'bundle' (a prior result directory)")
    bdir = Path(cfg.bundle)
    sol_path = bdir / "dual_solution.json"
    if not sol_path.exists():
        raise InputError(f"no dual_solution.json under {bdir}")
    with open(sol_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    plant = doc.get("plant", "example1")
    loaded = load_plant(plant)
    sys_, cost = loaded
    if isinstance(sys_, NonlinearStepper):
        raise InputError("certification needs a linear plant description")
    gamma = float(doc.get("gamma", cost.gamma))
    if gamma != cost.gamma:
        cost = CostSpec(cost.Q_seq, cost.R_seq, cost.Qf, gamma)
    Z = np.asarray(doc["Z"], dtype=float)
    sol = assembly.DualSolution(W=np.asarray(doc["W"], dtype=float),
                                G_seq=np.asarray(doc["G"], dtype=float),
                                objective=doc.get("objective"))
    cert = certify.build_kkt_certificate(sys_, cost, Z)
    report = certify.check_kkt(sys_, cost, Z, sol, cert, tolerance=cfg.tolerance)
    p2 = certify.check_problem2_feasibility(sol, sys_, cost, tolerance=cfg.tolerance)
    gains = assembly.gains_from_dual(sol)
    recon = certify.reconstruct_primal(sys_, cost, gains, Z)
    gap = certify.duality_gap(recon.objective, sol, Z)
    out = Path(cfg.out) if cfg.out else bdir
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "kkt_report.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    _write_json(out / "gap_report.json", {
        "primal_objective": recon.objective,
        "dual_objective": float(np.trace(Z @ sol.W)),
        "duality_gap": gap,
        "problem2_min_eigenvalue": p2.min_eigenvalue,
        "problem2_passed": p2.passed,
    })
    _log(f"certify: kkt {'pass' if report.passed else 'FAIL'} "
         f"(worst {report.worst()}, residual {report.max_residual:.3e}), gap {gap:.3e}")
    return report, gap, p2


# ----------------------------------------------------------------------
# generic synthesis modes
# ----------------------------------------------------------------------

def _resolve_linear_plant(cfg: ExperimentConfig):
    loaded = load_plant(cfg.plant)
    sys_, cost = loaded
    if isinstance(sys_, NonlinearStepper):
        raise InputError(f"mode '{cfg.mode}' needs a linear plant")
    if cfg.gamma is not None and cfg.gamma != cost.gamma:
        cost = CostSpec(cost.Q_seq, cost.R_seq, cost.Qf, cfg.gamma)
    return sys_, cost


def _finish_synthesis(cfg, sys_, cost, prog, res, sol, label):
    gains = assembly.gains_from_dual(sol)
    x0 = np.array(cfg.x0) if cfg.x0 else np.ones(sys_.n)
    traj = simulate_closed_loop(sys_, gains, x0)
    J = evaluate_cost(cost, traj)
    Z = prog.Z if prog.Z is not None else np.eye(sys_.n)
    if cfg.out:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "config.json", cfg.to_jsonable())
        _write_json(outdir / "gains.json", gains.K_seq.tolist())
        _write_json(outdir / "costs.json", {"J": J, "x0": x0.tolist()})
        _write_trajectory_csv(outdir / "trajectory.csv", traj, label)
        _write_json(outdir / "dual_solution.json",
                    _dual_solution_doc(sol, Z, cfg, cost.gamma, label))
        res.write_iteration_log(outdir / "solver_log.csv")
    _log(f"{label}: status={res.status} J={J:.6f} gap={res.gap:.2e}")
    return {"gains": gains, "J": J, "traj": traj, "status": res.status}


def run_riccati(cfg: ExperimentConfig) -> dict:
    sys_, cost = _resolve_linear_plant(cfg)
    P = riccati.solve_dre(sys_, cost)
    gains = riccati.optimal_gains(sys_, cost, P)
    qf = riccati.qfunction_matrices(sys_, cost, P)
    x0 = np.array(cfg.x0) if cfg.x0 else np.ones(sys_.n)
    traj = simulate_closed_loop(sys_, gains, x0)
    J = evaluate_cost(cost, traj)
    if cfg.out:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_json(outdir / "config.json", cfg.to_jsonable())
        _write_json(outdir / "gains.json", gains.K_seq.tolist())
        _write_json(outdir / "value_matrices.json", [Pk.tolist() for Pk in P.P_seq])
        _write_json(outdir / "costs.json", {"J": J, "x0": x0.tolist()})
        _write_trajectory_csv(outdir / "trajectory.csv", traj, "ric")
        sol = assembly.DualSolution(W=qf.W_hat, G_seq=qf.G_hat_seq,
                                    objective=float(np.trace(qf.W_hat)))
        _write_json(outdir / "dual_solution.json",
                    _dual_solution_doc(sol, np.eye(sys_.n), cfg, cost.gamma, "riccati"))
    _log(f"riccati: J={J:.6f}")
    return {"gains": gains, "P": P, "J": J}


def run_synth_model_based(cfg: ExperimentConfig) -> dict:
    sys_, cost = _resolve_linear_plant(cfg)
    prog = assembly.assemble_model_based(sys_, cost, tie_break=cfg.tie_break)
    res = _solve_or_fail(prog, cfg.solver_options())
    sol = assembly.extract_dual_solution(prog.layout, res.y)
    return _finish_synthesis(cfg, sys_, cost, prog, res, sol, "model-based")


def run_synth_data_ltv(cfg: ExperimentConfig) -> dict:
    sys_, cost = _resolve_linear_plant(cfg)
    l = cfg.l or (sys_.n + sys_.m)
    ensemble = _collect_linear(sys_, cfg, cost.gamma, l, cfg.sigma, cfg.seed)
    prog = assembly.assemble_model_free_ltv(ensemble, cost, tie_break=cfg.tie_break)
    res = _solve_or_fail(prog, cfg.solver_options())
    sol = assembly.extract_dual_solution(prog.layout, res.y)
    return _finish_synthesis(cfg, sys_, cost, prog, res, sol, "data-ltv")


def run_synth_data_lti(cfg: ExperimentConfig) -> dict:
    sys_, cost = _resolve_linear_plant(cfg)
    if np.ptp(sys_.A_seq, axis=0).max() > 0 or np.ptp(sys_.B_seq, axis=0).max() > 0:
        raise InputError("synth-data-lti needs a time-invariant plant")
    n, m = sys_.n, sys_.m
    s = n + m
    for attempt in range(5):
        rng = np.random.default_rng(cfg.seed + 1000 * attempt)
        x0 = rng.standard_normal(n)
        spec = _default_excitation(cfg, cfg.seed + 1000 * attempt)
        u = ensembles.generate_excitation(spec, m, s)
        short = TimeVaryingSystem(sys_.A_seq[:s], sys_.B_seq[:s])
        traj = simulate_open_loop(short, x0, u)
        data = ensembles.build_lti_trajectory_data(traj, n, m, k0=0)
        if ensembles.check_richness(data).overall_pass:
            break
    else:
        raise RankDeficiencyError("could not draw a persistently exciting trajectory", k=0)
    prog = assembly.assemble_model_free_lti(
        data, cost.Q_seq[0], cost.R_seq[0], cost.Qf, cost.gamma, cost.N,
        tie_break=cfg.tie_break)
    res = _solve_or_fail(prog, cfg.solver_options())
    sol = assembly.extract_dual_solution(prog.layout, res.y)
    return _finish_synthesis(cfg, sys_, cost, prog, res, sol, "data-lti")


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltvlq",
        description="Finite-horizon LQ gain synthesis for LTV systems from data")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="JSON config path")
    parser.add_argument("--out", help="output bundle directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--l", type=int)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--runs", type=int)
    parser.add_argument("--bundle", help="prior bundle directory (certify mode)")
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    cfg.mode = args.mode
    for name in ("out", "seed", "gamma", "l", "sigma", "runs", "bundle"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if cfg.mode == "example1":
            bundle = run_example1(gamma=cfg.gamma if cfg.gamma is not None else 0.98,
                                  l=cfg.l or 5, sigma=cfg.sigma, seed=cfg.seed,
                                  out=cfg.out, cfg=cfg)
            print(f"J_riccati={bundle['J_riccati']:.6f} "
                  f"J_model_based={bundle['J_model_based']:.6f} "
                  f"J_model_free={bundle['J_model_free']:.6f}")
        elif cfg.mode == "example2":
            bundle = run_example2(seed=cfg.seed, out=cfg.out, cfg=cfg)
            print(f"boundedness_ratio={bundle['boundedness_ratio']:.6f} "
                  f"open_loop_divergence_step={bundle['open_loop_divergence_step']}")
        elif cfg.mode == "monte-carlo":
            summary = run_monte_carlo(sigmas=cfg.sigmas, runs=cfg.runs,
                                      l=cfg.l or 5,
                                      seed=cfg.seed,
                                      gamma=cfg.gamma if cfg.gamma is not None else 1.0,
                                      out=cfg.out, cfg=cfg)
            for s, mc, f in zip(summary.sigmas, summary.mean_costs,
                                summary.failure_counts):
                print(f"sigma={s} mean_cost={mc:.4f} failures={f}")
        elif cfg.mode == "certify":
            report, gap, p2 = run_certify(cfg)
            print(f"kkt_passed={report.passed} worst={report.worst()} "
                  f"max_residual={report.max_residual:.3e} duality_gap={gap:.3e}")
            if not (report.passed and p2.passed):
                return EXIT_CERT
        elif cfg.mode == "riccati":
            run_riccati(cfg)
        elif cfg.mode == "synth-model-based":
            run_synth_model_based(cfg)
        elif cfg.mode == "synth-data-ltv":
            run_synth_data_ltv(cfg)
        elif cfg.mode == "synth-data-lti":
            run_synth_data_lti(cfg)
        return EXIT_OK
    except SolverFailure as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_SOLVER
    except RankDeficiencyError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_RANK
    except DivergenceError as exc:
        print(f"error: data collection failed: {exc}", file=_sys.stderr)
        return EXIT_RANK
    except CertificationError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_CERT
    except (InputError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
