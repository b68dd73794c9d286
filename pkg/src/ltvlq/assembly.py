"""Translation of the gain-synthesis problems into linear SDPs in LMI form.

A ConicProgram maximizes c'y subject to per-block constraints
F0 + sum_i y_i F_i >= 0 (positive semidefinite).  The scalar variables y are
the free entries of the symmetric unknowns (W, G(0), ..., G(N-1)); a shared
coordinate y for an off-diagonal pair (i, j) contributes
y * (e_i e_j' + e_j e_i'), so packing and unpacking are exact.

All three assemblies accept a tie_break weight that adds
tie_break * sum_k trace(G(k)) to the objective.  The feasible set has a
unique elementwise-maximal point in the semidefinite order (the per-step
state-action value matrices), and trace(ZW) alone does not separate points
of its optimal face whenever the closed-loop state covariance loses rank, so
the extra term pins the solver to the gain-consistent vertex without
changing the optimal W or the optimal value of trace(ZW).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .ensembles import DataEnsemble, LtiTrajectoryData, check_richness
from .errors import CertificationError, InputError, RankDeficiencyError
from .systems import CostSpec, GainSchedule, TimeVaryingSystem, stage_matrices


def _sym_coords(d):
    return [(i, j) for i in range(d) for j in range(i, d)]


@dataclass(frozen=True)
class VariableLayout:
    """Flat indexing of the free scalars of W and G(0..N-1)."""

    n: int
    m: int
    N: int

    @property
    def num_w(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def num_g_each(self) -> int:
        d = self.n + self.m
        return d * (d + 1) // 2

    @property
    def num_variables(self) -> int:
        return self.num_w + self.N * self.num_g_each

    @property
    def w_coords(self):
        return _sym_coords(self.n)

    @property
    def g_coords(self):
        return _sym_coords(self.n + self.m)

    def g_offset(self, k: int) -> int:
        return self.num_w + k * self.num_g_each

    def pack(self, W: np.ndarray, G_seq) -> np.ndarray:
        y = np.empty(self.num_variables)
        for t, (i, j) in enumerate(self.w_coords):
            y[t] = W[i, j]
        for k in range(self.N):
            off = self.g_offset(k)
            G = G_seq[k]
            for t, (i, j) in enumerate(self.g_coords):
                y[off + t] = G[i, j]
        return y

    def unpack(self, y: np.ndarray):
        if len(y) != self.num_variables:
            raise InputError(f"expected {self.num_variables} scalars, got {len(y)}")
        W = np.zeros((self.n, self.n))
        for t, (i, j) in enumerate(self.w_coords):
            W[i, j] = W[j, i] = y[t]
        d = self.n + self.m
        G_seq = np.zeros((self.N, d, d))
        for k in range(self.N):
            off = self.g_offset(k)
            for t, (i, j) in enumerate(self.g_coords):
                G_seq[k, i, j] = G_seq[k, j, i] = y[off + t]
        return W, G_seq


@dataclass(frozen=True)
class ConicBlock:
    """One affine constraint F0 + sum_i y[var_idx[i]] * coeffs[i] >= 0."""

    size: int
    F0: np.ndarray
    var_idx: np.ndarray
    coeffs: np.ndarray
    label: str = ""

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.F0 + np.einsum('i,iab->ab', y[self.var_idx], self.coeffs)


@dataclass(frozen=True)
class ConicProgram:
    """Linear SDP: maximize c'y subject to the PSD blocks.

    layout is present on programs produced by the assemblers and maps the
    flat vector back to (W, G); hand-built programs may leave it None.
    """

    c: np.ndarray
    blocks: list
    layout: VariableLayout | None = None
    Z: np.ndarray | None = None

    @property
    def num_variables(self) -> int:
        return len(self.c)

    def to_json(self) -> str:
        doc = {
            "vars": self.num_variables,
            "layout": (None if self.layout is None else
                       {"n": self.layout.n, "m": self.layout.m, "N": self.layout.N}),
            "objective": [[int(i), float(v)] for i, v in enumerate(self.c) if v != 0.0],
            "blocks": [
                {
                    "size": blk.size,
                    "label": blk.label,
                    "F0": blk.F0.tolist(),
                    "coeffs": [[int(vi), Fi.tolist()]
                               for vi, Fi in zip(blk.var_idx, blk.coeffs)],
                }
                for blk in self.blocks
            ],
        }
        if self.Z is not None:
            doc["Z"] = self.Z.tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ConicProgram":
        doc = json.loads(text)
        layout = VariableLayout(**doc["layout"]) if doc.get("layout") else None
        c = np.zeros(doc["vars"])
        for i, v in doc["objective"]:
            c[i] = v
        blocks = []
        for b in doc["blocks"]:
            idx = np.array([vi for vi, _ in b["coeffs"]], dtype=int)
            coeffs = np.array([Fi for _, Fi in b["coeffs"]], dtype=float)
            blocks.append(ConicBlock(size=b["size"], F0=np.asarray(b["F0"], dtype=float),
                                     var_idx=idx, coeffs=coeffs, label=b.get("label", "")))
        Z = np.asarray(doc["Z"], dtype=float) if "Z" in doc else None
        return cls(c=c, blocks=blocks, layout=layout, Z=Z)


@dataclass(frozen=True)
class DualSolution:
    """Symmetric unknowns recovered from a flat solver vector."""

    W: np.ndarray
    G_seq: np.ndarray
    objective: float | None = None

    @property
    def N(self) -> int:
        return self.G_seq.shape[0]

    def blocks(self, k, n):
        G = self.G_seq[k]
        return G[:n, :n], G[:n, n:], G[n:, n:]


# ----------------------------------------------------------------------
# coefficient construction helpers
# ----------------------------------------------------------------------

def _congruence_coeffs(Mt: np.ndarray, coords) -> np.ndarray:
    """Coefficients Mt' Theta_ij Mt for every symmetric coordinate (i, j).

    Mt maps the block space into the variable space (shape d_var x d_blk);
    Theta_ij = e_i e_j' + e_j e_i' for i != j and e_i e_i' on the diagonal.
    """
    out = np.empty((len(coords), Mt.shape[1], Mt.shape[1]))
    for t, (i, j) in enumerate(coords):
        if i == j:
            out[t] = np.outer(Mt[i], Mt[i])
        else:
            out[t] = np.outer(Mt[i], Mt[j]) + np.outer(Mt[j], Mt[i])
    return out


def _objective_vector(layout: VariableLayout, Z: np.ndarray, tie_break: float) -> np.ndarray:
    c = np.zeros(layout.num_variables)
    for t, (i, j) in enumerate(layout.w_coords):
        c[t] = Z[i, i] if i == j else 2.0 * Z[i, j]
    if tie_break:
        for k in range(layout.N):
            off = layout.g_offset(k)
            for t, (i, j) in enumerate(layout.g_coords):
                if i == j:
                    c[off + t] += tie_break
    return c


def _initial_block(layout: VariableLayout) -> ConicBlock:
    """[[G11(0) - W, G12(0)], [G12(0)', G22(0)]] >= 0."""
    n, m = layout.n, layout.m
    d = n + m
    idx = [layout.g_offset(0) + t for t in range(layout.num_g_each)]
    coeffs = list(_congruence_coeffs(np.eye(d), layout.g_coords))
    emb = np.zeros((n, d))
    emb[:, :n] = np.eye(n)
    for t, Fi in enumerate(-_congruence_coeffs(emb, layout.w_coords)):
        idx.append(t)
        coeffs.append(Fi)
    return ConicBlock(size=d, F0=np.zeros((d, d)), var_idx=np.array(idx),
                      coeffs=np.array(coeffs), label="initial-value-link")


def _chain_block(layout, k, d_left, m, Lam_embed, carrier, F0, label) -> ConicBlock:
    """One step-coupling block of size d_left + m.

    The G(k) variable enters as -(Lam_embed' Theta Lam_embed) in the leading
    d_left corner; the G(k+1) variable enters through the congruence
    [[carrier, 0], [0, I_m]].
    """
    n = layout.n
    d = d_left + m
    idx = [layout.g_offset(k) + t for t in range(layout.num_g_each)]
    Mt = np.zeros((n + m, d))
    Mt[:, :d_left] = Lam_embed
    coeffs = list(-_congruence_coeffs(Mt, layout.g_coords))
    U = np.zeros((n + m, d))
    U[:n, :d_left] = carrier
    U[n:, d_left:] = np.eye(m)
    for t, Fi in enumerate(_congruence_coeffs(U, layout.g_coords)):
        idx.append(layout.g_offset(k + 1) + t)
        coeffs.append(Fi)
    return ConicBlock(size=d, F0=F0, var_idx=np.array(idx),
                      coeffs=np.array(coeffs), label=label)


def _terminal_block(layout, data_map, F0, label) -> ConicBlock:
    """F0 - data_map' G(N-1) data_map >= 0."""
    idx = np.array([layout.g_offset(layout.N - 1) + t for t in range(layout.num_g_each)])
    coeffs = -_congruence_coeffs(data_map, layout.g_coords)
    return ConicBlock(size=data_map.shape[1], F0=F0, var_idx=idx,
                      coeffs=coeffs, label=label)


def _check_pd(Z, n):
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (n, n):
        raise InputError(f"Z must be {n} x {n}, got {Z.shape}")
    Z = 0.5 * (Z + Z.T)
    if np.linalg.eigvalsh(Z)[0] <= 0:
        raise InputError("Z must be positive definite")
    return Z


# ----------------------------------------------------------------------
# assemblies
# ----------------------------------------------------------------------

def assemble_model_based(sys: TimeVaryingSystem, cost: CostSpec, Z=None,
                         tie_break: float = 1.0) -> ConicProgram:
    """Model-based synthesis SDP over (W, G(0..N-1)).

    Objective trace(ZW) plus the gain-pinning tie-break term; N+1 blocks:
    the initial-value link, N-1 step couplings, and the terminal bound.
    """
    if (sys.n, sys.m, sys.N) != (cost.n, cost.m, cost.N):
        raise InputError("system and cost dimensions do not match")
    n, m, N = sys.n, sys.m, sys.N
    Z = np.eye(n) if Z is None else _check_pd(Z, n)
    layout = VariableLayout(n, m, N)
    c = _objective_vector(layout, Z, tie_break)
    blocks = [_initial_block(layout)]
    for k in range(N - 1):
        st = stage_matrices(sys, cost, k)
        F0 = np.zeros((n + m + m, n + m + m))
        F0[:n + m, :n + m] = st.Lambda_k
        blocks.append(_chain_block(layout, k, n + m, m, np.eye(n + m), st.E_k,
                                   F0, label=f"step-coupling-{k}"))
    stN = stage_matrices(sys, cost, N - 1)
    F0 = stN.E_k.T @ cost.Qf @ stN.E_k + stN.Lambda_k
    blocks.append(_terminal_block(layout, np.eye(n + m), F0, label="terminal-bound"))
    return ConicProgram(c=c, blocks=blocks, layout=layout, Z=Z)


def _data_preconditioners(D_seq, n_plus_m):
    """Invertible right-congruence factors that orthonormalize each D_k.

    Replacing (D_k, X_{k+1}) by (D_k R_k, X_{k+1} R_k) with invertible R_k
    is an exact reformulation of each block constraint; choosing R_k from
    the SVD of D_k flattens the data conditioning seen by the solver.
    """
    Rs = []
    for Dk in D_seq:
        l = Dk.shape[1]
        U, sv, Vt = np.linalg.svd(Dk, full_matrices=True)
        R = Vt.T.copy()
        R[:, :n_plus_m] = R[:, :n_plus_m] / sv[None, :n_plus_m]
        Rs.append(R)
    return Rs


def assemble_model_free_ltv(ensemble: DataEnsemble, cost: CostSpec,
                            tie_break: float = 1.0,
                            precondition: bool = True) -> ConicProgram:
    """Data-driven synthesis SDP built from a multi-experiment ensemble.

    Objective trace(W) (identity weighting) plus the tie-break term.
    Refuses with a rank error if any D_k lacks full row rank.
    """
    n, m, N, l = ensemble.n, ensemble.m, ensemble.N, ensemble.l
    if (cost.n, cost.m, cost.N) != (n, m, N):
        raise InputError("cost dimensions do not match the ensemble")
    report = check_richness(ensemble)
    if not report.overall_pass:
        k = report.first_failure()
        raise RankDeficiencyError(
            f"data matrix at step k={k} has rank {report.ranks[k]} < {n + m}", k=k)
    layout = VariableLayout(n, m, N)
    c = _objective_vector(layout, np.eye(n), tie_break)
    D = ensemble.D_seq
    X = ensemble.X_seq
    Rs = _data_preconditioners(D, n + m) if precondition else [np.eye(l)] * N
    blocks = [_initial_block(layout)]
    for k in range(N - 1):
        Dk = D[k] @ Rs[k]
        Xk1 = X[k + 1] @ Rs[k]
        Lam = np.zeros((n + m, n + m))
        Lam[:n, :n] = cost.Q_seq[k]
        Lam[n:, n:] = cost.R_seq[k]
        F0 = np.zeros((l + m, l + m))
        F0[:l, :l] = Dk.T @ Lam @ Dk
        blocks.append(_chain_block(layout, k, l, m, Dk, Xk1, F0,
                                   label=f"data-step-coupling-{k}"))
    DN = D[N - 1] @ Rs[N - 1]
    XN = X[N] @ Rs[N - 1]
    LamN = np.zeros((n + m, n + m))
    LamN[:n, :n] = cost.Q_seq[N - 1]
    LamN[n:, n:] = cost.R_seq[N - 1]
    F0 = XN.T @ cost.Qf @ XN + DN.T @ LamN @ DN
    blocks.append(_terminal_block(layout, DN, F0, label="data-terminal-bound"))
    return ConicProgram(c=c, blocks=blocks, layout=layout, Z=np.eye(n))


def assemble_model_free_lti(data: LtiTrajectoryData, Q, R, Qf, gamma: float,
                            N: int, tie_break: float = 1.0,
                            precondition: bool = True) -> ConicProgram:
    """Single-trajectory synthesis SDP for a time-invariant plant.

    The shared data pair (L, X_L) replaces the per-step ensembles; discount
    factors enter the constraints explicitly since the samples are raw.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Qf = np.atleast_2d(np.asarray(Qf, dtype=float))
    n = data.X_L.shape[0]
    m = data.L.shape[0] - n
    s = data.L.shape[1]
    if Q.shape != (n, n) or R.shape != (m, m) or Qf.shape != (n, n):
        raise InputError("weight dimensions do not match the data")
    report = check_richness(data)
    if not report.overall_pass:
        raise RankDeficiencyError(
            f"trajectory data matrix has rank {report.ranks[0]} < {n + m}", k=data.k0)
    if precondition:
        Rc = _data_preconditioners([data.L], n + m)[0]
        L = data.L @ Rc
        XL = data.X_L @ Rc
    else:
        L, XL = data.L, data.X_L
    layout = VariableLayout(n, m, N)
    c = _objective_vector(layout, np.eye(n), tie_break)
    Lam = np.zeros((n + m, n + m))
    Lam[:n, :n] = Q
    Lam[n:, n:] = R
    sg = np.sqrt(gamma)
    blocks = [_initial_block(layout)]
    for k in range(N - 1):
        F0 = np.zeros((s + m, s + m))
        F0[:s, :s] = L.T @ Lam @ L
        blocks.append(_chain_block(layout, k, s, m, L, sg * XL, F0,
                                   label=f"lti-step-coupling-{k}"))
    F0 = gamma * (XL.T @ Qf @ XL) + L.T @ Lam @ L
    blocks.append(_terminal_block(layout, L, F0, label="lti-terminal-bound"))
    return ConicProgram(c=c, blocks=blocks, layout=layout, Z=np.eye(n))


# ----------------------------------------------------------------------
# solution mapping
# ----------------------------------------------------------------------

def extract_dual_solution(layout: VariableLayout, y: np.ndarray,
                          Z: np.ndarray | None = None) -> DualSolution:
    """Rebuild (W, G(0..N-1)) from a flat vector; objective is trace(ZW)."""
    W, G_seq = layout.unpack(np.asarray(y, dtype=float))
    Zm = np.eye(layout.n) if Z is None else Z
    return DualSolution(W=W, G_seq=G_seq, objective=float(np.trace(Zm @ W)))


def gains_from_dual(sol: DualSolution) -> GainSchedule:
    """Extract K(k) = -G22(k)^-1 G12(k)' from a dual solution.

    Raises CertificationError when some G22(k) is not safely positive
    definite (scale-aware floor 1e-9 * trace(G22)/m).
    """
    d = sol.G_seq.shape[1]
    # infer n from W
    n = sol.W.shape[0]
    m = d - n
    K = np.empty((sol.N, m, n))
    for k in range(sol.N):
        G22 = sol.G_seq[k, n:, n:]
        G12 = sol.G_seq[k, :n, n:]
        floor = 1e-9 * np.trace(G22) / m
        lam = np.linalg.eigvalsh(0.5 * (G22 + G22.T))[0]
        if not np.isfinite(lam) or lam <= max(floor, 0.0):
            raise CertificationError(
                f"G22({k}) is not positive definite (min eigenvalue {lam:.3e}); "
                "the solution cannot be converted to gains")
        K[k] = -np.linalg.solve(G22, G12.T)
    return GainSchedule(K)
