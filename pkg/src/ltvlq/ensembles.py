"""Excitation design, multi-experiment data collection, and richness checks.

Data matrices follow the discounted stacking convention: column j of X_k is
gamma^(k/2) times the recorded state of experiment j at time k, and D_k
stacks X_k over U_k.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DivergenceError, InputError
from .systems import NonlinearStepper, TimeVaryingSystem, Trajectory

# Ratio of smallest to largest singular value below which a data matrix is
# declared rank deficient.
RANK_TOL = 1e-8

EXCITATION_KINDS = ("gaussian-white", "sum-of-sinusoids", "piecewise-constant")


@dataclass(frozen=True)
class ExcitationSpec:
    """Recipe for a persistently exciting input sequence."""

    kind: str = "gaussian-white"
    amplitude: float = 1.0
    seed: int = 0
    count: int = 8                      # sinusoids per channel
    freq_range: tuple = (0.05, 2.5)     # rad per step
    dwell: int = 3                      # steps per level for piecewise inputs

    def __post_init__(self):
        if self.kind not in EXCITATION_KINDS:
            raise InputError(f"unknown excitation kind '{self.kind}'")
        if not self.amplitude > 0:
            raise InputError("amplitude must be positive")
        if self.count < 1:
            raise InputError("sinusoid count must be >= 1")
        if self.dwell < 1:
            raise InputError("dwell must be >= 1")


def generate_excitation(spec: ExcitationSpec, m: int, N: int) -> np.ndarray:
    """Deterministic (N, m) input sequence for the given spec and seed."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian-white":
        return spec.amplitude * rng.standard_normal((N, m))
    if spec.kind == "sum-of-sinusoids":
        k = np.arange(N)[:, None, None]
        freqs = rng.uniform(*spec.freq_range, size=(1, m, spec.count))
        phases = rng.uniform(0, 2 * np.pi, size=(1, m, spec.count))
        u = np.sin(freqs * k + phases).sum(axis=2)
        peak = np.max(np.abs(u))
        if peak > 0:
            u *= spec.amplitude / peak
        return u
    # piecewise-constant
    levels = rng.uniform(-spec.amplitude, spec.amplitude,
                         size=((N + spec.dwell - 1) // spec.dwell, m))
    return np.repeat(levels, spec.dwell, axis=0)[:N]


@dataclass(frozen=True)
class DataEnsemble:
    """Discounted data matrices from l independent experiments.

    X_seq is (N+1, n, l), U_seq is (N, m, l).  D_seq stacks them per step.
    """

    X_seq: np.ndarray
    U_seq: np.ndarray
    gamma: float
    noise_sigma: float = 0.0
    seed: int = 0

    @property
    def l(self) -> int:
        return self.X_seq.shape[2]

    @property
    def n(self) -> int:
        return self.X_seq.shape[1]

    @property
    def m(self) -> int:
        return self.U_seq.shape[1]

    @property
    def N(self) -> int:
        return self.U_seq.shape[0]

    @property
    def D_seq(self) -> np.ndarray:
        return np.concatenate([self.X_seq[:self.N], self.U_seq], axis=1)

    def to_json(self) -> str:
        doc = {
            "meta": {"l": self.l, "n": self.n, "m": self.m, "N": self.N,
                     "gamma": self.gamma, "noise_sigma": self.noise_sigma,
                     "seed": self.seed},
            "X": [Xk.tolist() for Xk in self.X_seq],
            "U": [Uk.tolist() for Uk in self.U_seq],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "DataEnsemble":
        doc = json.loads(text)
        meta = doc["meta"]
        return cls(np.asarray(doc["X"], dtype=float), np.asarray(doc["U"], dtype=float),
                   gamma=meta["gamma"], noise_sigma=meta["noise_sigma"], seed=meta["seed"])

    def export_csv(self, directory):
        """One CSV per time index for inspection: rows are [x; u] entries."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        D = self.D_seq
        for k in range(self.N):
            np.savetxt(directory / f"D_{k:03d}.csv", D[k], delimiter=",")
        np.savetxt(directory / f"X_{self.N:03d}.csv", self.X_seq[self.N], delimiter=",")


@dataclass(frozen=True)
class LtiTrajectoryData:
    """Single-trajectory data pair for the time-invariant case.

    L stacks s consecutive input-state samples; X_L holds the one-step
    shifted states, so X_L = [A B] L when the plant is LTI and noise free.
    """

    L: np.ndarray
    X_L: np.ndarray
    s: int
    k0: int


@dataclass(frozen=True)
class RichnessReport:
    """Per-step rank diagnostics against the full-row-rank requirement."""

    required_rank: int
    ranks: np.ndarray
    smallest_sv: np.ndarray
    largest_sv: np.ndarray
    passes: np.ndarray
    rank_tol: float = RANK_TOL

    @property
    def overall_pass(self) -> bool:
        return bool(np.all(self.passes))

    def first_failure(self):
        """Index of the first failing step, or None."""
        bad = np.nonzero(~self.passes)[0]
        return int(bad[0]) if bad.size else None


def collect_ensemble(plant, init_states, inputs, gamma: float,
                     noise_sigma: float = 0.0, seed: int = 0) -> DataEnsemble:
    """Run l independent experiments and assemble the discounted data matrices.

    plant is a TimeVaryingSystem or NonlinearStepper.  init_states is (l, n),
    inputs is (l, N, m).  Measurement noise (i.i.d. Gaussian, std noise_sigma)
    is added to the recorded states only; inputs enter exactly.
    """
    init_states = np.atleast_2d(np.asarray(init_states, dtype=float))
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 3:
        raise InputError("inputs must be (l, N, m)")
    l, N, m = inputs.shape
    if init_states.shape[0] != l:
        raise InputError(f"need {l} initial states, got {init_states.shape[0]}")
    n = init_states.shape[1]
    if isinstance(plant, TimeVaryingSystem):
        if (plant.n, plant.m) != (n, m) or plant.N < N:
            raise InputError("plant dimensions do not match the experiment design")
        def step(k, x, u):
            return plant.A_seq[k] @ x + plant.B_seq[k] @ u
    elif isinstance(plant, NonlinearStepper):
        if (plant.n, plant.m) != (n, m):
            raise InputError("plant dimensions do not match the experiment design")
        step = plant.step
    else:
        raise InputError(f"unsupported plant type {type(plant).__name__}")

    rng = np.random.default_rng(seed)
    raw = np.empty((N + 1, n, l))
    for j in range(l):
        x = init_states[j]
        raw[0, :, j] = x
        for k in range(N):
            x = np.asarray(step(k, x, inputs[j, k]), dtype=float).reshape(-1)
            if not np.all(np.isfinite(x)):
                raise DivergenceError(
                    f"experiment {j} diverged at step {k}", step=k, experiment=j)
            raw[k + 1, :, j] = x
    if noise_sigma > 0:
        raw = raw + noise_sigma * rng.standard_normal(raw.shape)
    scale = gamma ** (np.arange(N + 1) / 2.0)
    X = raw * scale[:, None, None]
    U = inputs.transpose(1, 2, 0) * scale[:N, None, None]
    return DataEnsemble(X, U, gamma=gamma, noise_sigma=noise_sigma, seed=seed)


def _rank_from_svs(sv: np.ndarray) -> int:
    if sv.size == 0 or sv[0] <= 0:
        return 0
    return int(np.sum(sv > RANK_TOL * sv[0]))


def check_richness(data) -> RichnessReport:
    """Rank diagnostics for a DataEnsemble (per k) or LtiTrajectoryData (on L)."""
    if isinstance(data, DataEnsemble):
        required = data.n + data.m
        D = data.D_seq
        svs = [np.linalg.svd(D[k], compute_uv=False) for k in range(data.N)]
    elif isinstance(data, LtiTrajectoryData):
        required = data.L.shape[0]
        svs = [np.linalg.svd(data.L, compute_uv=False)]
    else:
        raise InputError(f"unsupported data type {type(data).__name__}")
    ranks = np.array([_rank_from_svs(sv) for sv in svs])
    smallest = np.array([sv[required - 1] if sv.size >= required else 0.0 for sv in svs])
    largest = np.array([sv[0] for sv in svs])
    passes = (ranks >= required) & (smallest > RANK_TOL * largest)
    return RichnessReport(required_rank=required, ranks=ranks, smallest_sv=smallest,
                          largest_sv=largest, passes=passes)


def build_lti_trajectory_data(traj: Trajectory, n: int, m: int, k0: int = 0,
                              s: int | None = None) -> LtiTrajectoryData:
    """Slice a single trajectory into the stacked data pair (L, X_L).

    The minimal design uses s = n + m columns, which needs k0 + s + 1
    recorded states.
    """
    if s is None:
        s = n + m
    states = np.atleast_2d(traj.states)
    inputs = np.atleast_2d(traj.inputs)
    if states.shape[0] < k0 + s + 1:
        raise InputError(
            f"trajectory too short: need {k0 + s + 1} states, have {states.shape[0]}")
    if states.shape[1] != n or inputs.shape[1] != m:
        raise InputError("trajectory dimensions do not match (n, m)")
    L = np.vstack([states[k0:k0 + s].T, inputs[k0:k0 + s].T])
    X_L = states[k0 + 1:k0 + s + 1].T
    return LtiTrajectoryData(L=L, X_L=X_L, s=s, k0=k0)
