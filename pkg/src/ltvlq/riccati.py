"""Exact model-based baseline: backward Riccati recursion and Q-function matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConditioningError, InputError
from .systems import CostSpec, GainSchedule, TimeVaryingSystem

# Condition-number cap on the input-side solve R(k) + gamma B' P B.
COND_LIMIT = 1e14


@dataclass(frozen=True)
class ValueMatrices:
    """Cost-to-go matrices P(0..N), with P(N) equal to the terminal weight."""

    P_seq: np.ndarray

    @property
    def N(self) -> int:
        return self.P_seq.shape[0] - 1

    def __getitem__(self, k):
        return self.P_seq[k]


@dataclass(frozen=True)
class QFunctionCertificate:
    """Per-step state-action value matrices and the initial cost-to-go matrix.

    G_hat_seq[k] is the (n+m) x (n+m) quadratic form over stacked (state,
    input) whose minimizer in the input recovers the optimal gain; W_hat
    equals P(0).
    """

    G_hat_seq: np.ndarray
    W_hat: np.ndarray
    n: int
    m: int

    def blocks(self, k):
        """Return (G11, G12, G22) of step k."""
        G = self.G_hat_seq[k]
        n = self.n
        return G[:n, :n], G[:n, n:], G[n:, n:]


def _input_side_solve(Rk, Bk, Pk1, Ak, gamma):
    """Solve (R + gamma B'PB) X = gamma B'PA by symmetric factorization."""
    Mk = Rk + gamma * Bk.T @ Pk1 @ Bk
    Mk = 0.5 * (Mk + Mk.T)
    lam = np.linalg.eigvalsh(Mk)
    if lam[0] <= 0 or lam[-1] / lam[0] > COND_LIMIT:
        raise ConditioningError(
            f"input-side matrix is numerically singular (eig range {lam[0]:.3e}..{lam[-1]:.3e})")
    cf = sla.cho_factor(Mk, check_finite=False)
    return sla.cho_solve(cf, gamma * Bk.T @ Pk1 @ Ak, check_finite=False)


def solve_dre(sys: TimeVaryingSystem, cost: CostSpec) -> ValueMatrices:
    """Backward difference Riccati recursion from P(N) = Qf down to P(0).

    Each step re-symmetrizes P(k) to suppress drift over long horizons.
    """
    if (sys.n, sys.m, sys.N) != (cost.n, cost.m, cost.N):
        raise InputError("system and cost dimensions do not match")
    n, N, g = sys.n, sys.N, cost.gamma
    P = np.empty((N + 1, n, n))
    P[N] = cost.Qf
    for k in range(N - 1, -1, -1):
        Ak, Bk = sys.A_seq[k], sys.B_seq[k]
        X = _input_side_solve(cost.R_seq[k], Bk, P[k + 1], Ak, g)
        Pk = cost.Q_seq[k] + g * Ak.T @ P[k + 1] @ Ak - g * (Ak.T @ P[k + 1] @ Bk) @ X
        P[k] = 0.5 * (Pk + Pk.T)
    return ValueMatrices(P)


def optimal_gains(sys: TimeVaryingSystem, cost: CostSpec, P: ValueMatrices) -> GainSchedule:
    """Optimal feedback gains K(k) = -(R + gamma B'PB)^-1 gamma B'PA."""
    if P.P_seq.shape != (sys.N + 1, sys.n, sys.n):
        raise InputError("value matrices do not match the system horizon")
    K = np.empty((sys.N, sys.m, sys.n))
    for k in range(sys.N):
        K[k] = -_input_side_solve(cost.R_seq[k], sys.B_seq[k], P[k + 1],
                                  sys.A_seq[k], cost.gamma)
    return GainSchedule(K)


def qfunction_matrices(sys: TimeVaryingSystem, cost: CostSpec,
                       P: ValueMatrices) -> QFunctionCertificate:
    """Assemble the per-step state-action value matrices from P."""
    n, m, N, g = sys.n, sys.m, sys.N, cost.gamma
    G = np.empty((N, n + m, n + m))
    for k in range(N):
        Ak, Bk, Pk1 = sys.A_seq[k], sys.B_seq[k], P[k + 1]
        G[k, :n, :n] = cost.Q_seq[k] + g * Ak.T @ Pk1 @ Ak
        G[k, :n, n:] = g * Ak.T @ Pk1 @ Bk
        G[k, n:, :n] = G[k, :n, n:].T
        G[k, n:, n:] = cost.R_seq[k] + g * Bk.T @ Pk1 @ Bk
        G[k] = 0.5 * (G[k] + G[k].T)
    return QFunctionCertificate(G_hat_seq=G, W_hat=P[0].copy(), n=n, m=m)
