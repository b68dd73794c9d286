"""Discrete-time LTV systems, quadratic costs, and trajectory simulation.

All matrix sequences are stored as 3-d arrays indexed by time step, so a
system with horizon N keeps A as (N, n, n) and B as (N, n, m).  States are
1-d arrays of length n.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DivergenceError, InputError

# Tolerance for accepting nearly-symmetric weight matrices (relative to norm);
# matrices are symmetrized on ingestion since JSON round trips break exactness.
SYM_TOL = 1e-10
# Eigenvalue floor for the input weights, which must be positive definite.
PD_FLOOR = 1e-12


def _as_seq(M, N, rows, cols, name) -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 2:
        arr = np.broadcast_to(arr, (N, rows, cols)).copy()
    if arr.shape != (N, rows, cols):
        raise InputError(f"{name} must have shape ({N}, {rows}, {cols}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def _symmetrize_checked(M, name, psd=False, pd=False) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    scale = max(np.linalg.norm(M), 1.0)
    if np.linalg.norm(M - M.T) > SYM_TOL * scale:
        raise InputError(f"{name} is not symmetric (relative asymmetry above {SYM_TOL})")
    M = 0.5 * (M + M.T)
    if psd or pd:
        lam = np.linalg.eigvalsh(M)[0]
        if pd and lam < PD_FLOOR:
            raise InputError(f"{name} must be positive definite (min eigenvalue {lam:.3e})")
        if psd and lam < -SYM_TOL * scale:
            raise InputError(f"{name} must be positive semidefinite (min eigenvalue {lam:.3e})")
    return M


@dataclass(frozen=True)
class TimeVaryingSystem:
    """x(k+1) = A(k) x(k) + B(k) u(k) over k = 0..N-1."""

    A_seq: np.ndarray
    B_seq: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A_seq, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise InputError(f"A_seq must be (N, n, n), got {A.shape}")
        N, n, _ = A.shape
        if N < 1 or n < 1:
            raise InputError("need N >= 1 and n >= 1")
        B = np.asarray(self.B_seq, dtype=float)
        if B.ndim != 3 or B.shape[0] != N or B.shape[1] != n or B.shape[2] < 1:
            raise InputError(f"B_seq must be ({N}, {n}, m>=1), got {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise InputError("system matrices contain non-finite entries")
        object.__setattr__(self, "A_seq", A)
        object.__setattr__(self, "B_seq", B)

    @property
    def n(self) -> int:
        return self.A_seq.shape[1]

    @property
    def m(self) -> int:
        return self.B_seq.shape[2]

    @property
    def N(self) -> int:
        return self.A_seq.shape[0]

    @classmethod
    def constant(cls, A, B, N) -> "TimeVaryingSystem":
        """LTI convenience: repeat (A, B) across an N-step horizon."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        return cls(np.repeat(A[None], N, axis=0), np.repeat(B[None], N, axis=0))


@dataclass(frozen=True)
class CostSpec:
    """Stage weights Q(k), R(k), terminal weight Qf, and discount gamma."""

    Q_seq: np.ndarray
    R_seq: np.ndarray
    Qf: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        Q = np.asarray(self.Q_seq, dtype=float)
        R = np.asarray(self.R_seq, dtype=float)
        if Q.ndim != 3 or R.ndim != 3 or Q.shape[0] != R.shape[0]:
            raise InputError("Q_seq and R_seq must be 3-d with matching horizon")
        Q = np.stack([_symmetrize_checked(Qk, f"Q({k})", psd=True) for k, Qk in enumerate(Q)])
        R = np.stack([_symmetrize_checked(Rk, f"R({k})", pd=True) for k, Rk in enumerate(R)])
        Qf = _symmetrize_checked(self.Qf, "Qf", psd=True)
        if Qf.shape != Q.shape[1:]:
            raise InputError("Qf dimension does not match Q(k)")
        if not (0.0 < self.gamma <= 1.0):
            raise InputError(f"gamma must lie in (0, 1], got {self.gamma}")
        object.__setattr__(self, "Q_seq", Q)
        object.__setattr__(self, "R_seq", R)
        object.__setattr__(self, "Qf", Qf)

    @property
    def n(self) -> int:
        return self.Q_seq.shape[1]

    @property
    def m(self) -> int:
        return self.R_seq.shape[1]

    @property
    def N(self) -> int:
        return self.Q_seq.shape[0]

    @classmethod
    def constant(cls, Q, R, Qf, gamma, N) -> "CostSpec":
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        R = np.atleast_2d(np.asarray(R, dtype=float))
        Qf = np.atleast_2d(np.asarray(Qf, dtype=float))
        return cls(np.repeat(Q[None], N, axis=0), np.repeat(R[None], N, axis=0), Qf, gamma)


@dataclass(frozen=True)
class StageMatrices:
    """Augmented stage data: Lambda(k) = blkdiag(Q, R), E(k) = sqrt(gamma) [A B]."""

    Lambda_k: np.ndarray
    E_k: np.ndarray


@dataclass(frozen=True)
class Trajectory:
    """A rollout: states has N+1 rows, inputs has N rows."""

    states: np.ndarray
    inputs: np.ndarray
    origin: str = "open-loop"

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if states.shape[0] != inputs.shape[0] + 1:
            raise InputError("states must have exactly one more row than inputs")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)

    @property
    def N(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class GainSchedule:
    """State-feedback gains K(0..N-1), each of shape (m, n)."""

    K_seq: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K_seq, dtype=float)
        if K.ndim != 3:
            raise InputError(f"K_seq must be (N, m, n), got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise InputError("gain schedule contains non-finite entries")
        object.__setattr__(self, "K_seq", K)

    @property
    def N(self) -> int:
        return self.K_seq.shape[0]

    def __iter__(self):
        return iter(self.K_seq)

    def __getitem__(self, k):
        return self.K_seq[k]


@dataclass(frozen=True)
class NonlinearStepper:
    """Generic plant given by a state-transition map (k, x, u) -> x_next."""

    step: Callable[[int, np.ndarray, np.ndarray], np.ndarray]
    n: int
    m: int


def simulate_open_loop(sys: TimeVaryingSystem, x0, u_seq) -> Trajectory:
    """Roll the linear dynamics forward under a fixed input sequence."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise InputError(f"x0 has dimension {x0.shape[0]}, expected {sys.n}")
    if not np.all(np.isfinite(x0)):
        raise InputError("x0 contains non-finite entries")
    u = np.asarray(u_seq, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape != (sys.N, sys.m):
        raise InputError(f"u_seq must have shape ({sys.N}, {sys.m}), got {u.shape}")
    states = np.empty((sys.N + 1, sys.n))
    states[0] = x0
    for k in range(sys.N):
        states[k + 1] = sys.A_seq[k] @ states[k] + sys.B_seq[k] @ u[k]
    return Trajectory(states, u, origin="open-loop")


def simulate_closed_loop(sys: TimeVaryingSystem, gains: GainSchedule, x0) -> Trajectory:
    """Roll the linear dynamics forward under u(k) = K(k) x(k)."""
    K = np.asarray(gains.K_seq, dtype=float)
    if K.shape != (sys.N, sys.m, sys.n):
        raise InputError(f"gains must have shape ({sys.N}, {sys.m}, {sys.n}), got {K.shape}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != sys.n:
        raise InputError(f"x0 has dimension {x0.shape[0]}, expected {sys.n}")
    states = np.empty((sys.N + 1, sys.n))
    inputs = np.empty((sys.N, sys.m))
    states[0] = x0
    for k in range(sys.N):
        inputs[k] = K[k] @ states[k]
        states[k + 1] = sys.A_seq[k] @ states[k] + sys.B_seq[k] @ inputs[k]
    return Trajectory(states, inputs, origin="closed-loop")


def simulate_nonlinear_closed_loop(plant: NonlinearStepper, gains: GainSchedule, x0) -> Trajectory:
    """Roll a nonlinear plant forward under u(k) = K(k) x(k).

    Raises DivergenceError with the offending step index if the state
    leaves the representable range.
    """
    K = np.asarray(gains.K_seq, dtype=float)
    if K.shape[1:] != (plant.m, plant.n):
        raise InputError(f"gains must be (N, {plant.m}, {plant.n}), got {K.shape}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != plant.n:
        raise InputError(f"x0 has dimension {x0.shape[0]}, expected {plant.n}")
    N = K.shape[0]
    states = np.empty((N + 1, plant.n))
    inputs = np.empty((N, plant.m))
    states[0] = x0
    for k in range(N):
        inputs[k] = K[k] @ states[k]
        nxt = np.asarray(plant.step(k, states[k], inputs[k]), dtype=float).reshape(-1)
        if not np.all(np.isfinite(nxt)):
            raise DivergenceError(f"state diverged at step {k}", step=k)
        states[k + 1] = nxt
    return Trajectory(states, inputs, origin="nonlinear")


def evaluate_cost(cost: CostSpec, traj: Trajectory) -> float:
    """Discounted quadratic cost of a trajectory, terminal weight included."""
    N = cost.N
    if traj.states.shape != (N + 1, cost.n) or traj.inputs.shape != (N, cost.m):
        raise InputError("trajectory lengths do not match the cost horizon")
    g = cost.gamma
    J = 0.0
    for k in range(N):
        x, u = traj.states[k], traj.inputs[k]
        J += g**k * (x @ cost.Q_seq[k] @ x + u @ cost.R_seq[k] @ u)
    xN = traj.states[N]
    return float(J + g**N * (xN @ cost.Qf @ xN))


def stage_matrices(sys: TimeVaryingSystem, cost: CostSpec, k: int) -> StageMatrices:
    """Augmented matrices at step k: Lambda(k) and E(k)."""
    if not (0 <= k <= sys.N - 1):
        raise InputError(f"k must lie in [0, {sys.N - 1}], got {k}")
    n, m = sys.n, sys.m
    Lam = np.zeros((n + m, n + m))
    Lam[:n, :n] = cost.Q_seq[k]
    Lam[n:, n:] = cost.R_seq[k]
    E = np.sqrt(cost.gamma) * np.hstack([sys.A_seq[k], sys.B_seq[k]])
    return StageMatrices(Lambda_k=Lam, E_k=E)


# ----------------------------------------------------------------------
# Built-in plants
# ----------------------------------------------------------------------

def example1_system(gamma: float = 0.98, N: int = 35) -> tuple[TimeVaryingSystem, CostSpec]:
    """Unstable 4-state, 1-input LTV benchmark with its LQ weights."""
    ks = np.arange(N, dtype=float)
    A = np.empty((N, 4, 4))
    A[:, 0, 0] = 1 - 0.05 * ks
    A[:, 0, 1] = -0.5 * np.cos(0.2 * ks) * np.sqrt(ks)
    A[:, 0, 2] = -0.1
    A[:, 0, 3] = 0.02 * ks
    A[:, 1, 0] = -0.1 * np.cos(0.3 * ks)
    A[:, 1, 1] = 0.0
    A[:, 1, 2] = 0.03 * np.sqrt(ks)
    A[:, 1, 3] = 0.2
    A[:, 2, 0] = 0.1 * np.sin(0.5 * ks)
    A[:, 2, 1] = -0.2
    A[:, 2, 2] = 1 - 0.01 * ks
    A[:, 2, 3] = 0.002 * ks
    A[:, 3, 0] = 0.0
    A[:, 3, 1] = 0.01 * ks
    A[:, 3, 2] = 0.1 * np.cos(0.2 * ks)
    A[:, 3, 3] = 1 + 0.03 * np.sin(0.1 * ks)
    B = np.empty((N, 4, 1))
    B[:, 0, 0] = 0.1 * ks
    B[:, 1, 0] = 0.1 * (1 - np.cos(0.1 * ks))
    B[:, 2, 0] = 0.1 * ks
    B[:, 3, 0] = 0.1
    sys = TimeVaryingSystem(A, B)
    cost = CostSpec.constant(np.eye(4), [[0.01]], 10 * np.eye(4), gamma, N)
    return sys, cost


def _example2_step(k: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    x1, x2, x3 = x
    uu = float(u[0])
    return np.array([
        -(1 + 0.04 * np.cos(0.1 * k)) * x1 + 0.5 * np.sin(0.2 * k) * uu,
        -0.1 * np.sin(0.5 * k) * x1 * x2 - 0.05 * k * x3 / (x2 + 1.0) - 0.05 * uu,
        0.04 * k**1.5 * x1 - x2 + 0.1 * k * x2 * uu,
    ])


def example2_plant(gamma: float = 0.98, N: int = 25) -> tuple[NonlinearStepper, CostSpec]:
    """Open-loop unstable 3-state nonlinear benchmark with its LQ weights.

    The stage weights grow with k: Q(k) = (0.5 k + 2) I, R(k) = 2 - 0.01 k.
    Weight matrices are sized to the 3-dimensional state.
    """
    plant = NonlinearStepper(step=_example2_step, n=3, m=1)
    Q = np.stack([(0.5 * k + 2) * np.eye(3) for k in range(N)])
    R = np.stack([np.array([[2 - 0.01 * k]]) for k in range(N)])
    cost = CostSpec(Q, R, 50 * np.eye(3), gamma)
    return plant, cost


def system_from_dict(doc: dict) -> tuple[TimeVaryingSystem, CostSpec]:
    """Build a system and cost from the documented JSON layout.

    Expected keys: n, m, N, A, B, Q, R, Qf, gamma.  A/B/Q/R hold one
    row-major matrix per time step (a single matrix is broadcast).
    """
    try:
        n, m, N = int(doc["n"]), int(doc["m"]), int(doc["N"])
    except KeyError as exc:
        raise InputError(f"plant document is missing key {exc}") from exc
    gamma = float(doc.get("gamma", 1.0))

    def grab(key, rows, cols):
        if key not in doc:
            raise InputError(f"plant document is missing key '{key}'")
        return _as_seq(doc[key], N, rows, cols, key)

    A = grab("A", n, n)
    B = grab("B", n, m)
    Q = grab("Q", n, n)
    R = grab("R", m, m)
    Qf = np.asarray(doc.get("Qf", np.zeros((n, n))), dtype=float)
    sys = TimeVaryingSystem(A, B)
    cost = CostSpec(Q, R, Qf, gamma)
    return sys, cost


def load_plant(source):
    """Resolve a plant selector to (system-or-stepper, cost).

    Accepts the built-in names 'example1' and 'example2', a path to a JSON
    document, or an already-parsed dict.
    """
    if isinstance(source, str) and source == "example1":
        return example1_system()
    if isinstance(source, str) and source == "example2":
        return example2_plant()
    if isinstance(source, dict):
        return system_from_dict(source)
    path = Path(source)
    if not path.exists():
        raise InputError(f"plant source '{source}' is neither a built-in name nor a file")
    with open(path, "r", encoding="utf-8") as fh:
        return system_from_dict(json.load(fh))
