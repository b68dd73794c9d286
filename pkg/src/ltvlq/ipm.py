"""Dense primal-dual interior-point solver for linear SDPs in LMI form.

Solves  maximize c'y  subject to  S_b(y) = F0_b + sum_i y_i F_i_b >= 0
over a list of PSD blocks, together with the companion problem in the
multipliers M_b >= 0 satisfying sum_b <F_i_b, M_b> = -c_i.  The pairing
gives <S, M> = <F0, M> - c'y >= 0, so the inner product of slacks and
multipliers is the duality gap.

The search direction is the HKM symmetrized Newton direction with Mehrotra
predictor-corrector; the Schur complement is formed densely per block and
factored by Cholesky with Jacobi equilibration, an escalating ridge, and
iterative refinement (symmetric-pivoting LDL is the final fallback).  An
equivalent rescaling of the program (per-block and per-variable norms) is
applied internally and undone on exit.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import ConicProgram
from .errors import InputError

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max-iterations"
STATUS_PRIMAL_INFEASIBLE = "primal-infeasible-certificate"
STATUS_DUAL_INFEASIBLE = "dual-infeasible-certificate"
STATUS_NUMERICAL = "numerical-failure"


@dataclass(frozen=True)
class SolverOptions:
    max_iterations: int = 200
    gap_tol: float = 1e-9
    feas_tol: float = 1e-9
    step_fraction: float = 0.98
    predictor_corrector: bool = True
    verbosity: int = 0
    # iterations without merit improvement before the run is cut short
    stall_iterations: int = 30

    def __post_init__(self):
        if not (0.0 < self.step_fraction < 1.0):
            raise InputError("step_fraction must lie in (0, 1)")
        if self.gap_tol <= 0 or self.feas_tol <= 0:
            raise InputError("tolerances must be positive")


@dataclass
class SolverResult:
    status: str
    y: np.ndarray
    slacks: list
    multipliers: list
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    wall_time: float
    objective: float
    history: list = field(default_factory=list)
    diagnostics: str = ""

    def write_iteration_log(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iter,gap,primal_res,dual_res,step\n")
            for row in self.history:
                fh.write(f"{row[0]},{row[1]:.6e},{row[2]:.6e},{row[3]:.6e},{row[4]:.6e}\n")


@dataclass(frozen=True)
class ResidualReport:
    primal_residuals: np.ndarray   # per block, Frobenius
    dual_residual: float           # || c - A*(M) ||
    complementarity: np.ndarray    # per block, <S_b, M_b>


def residuals(program: ConicProgram, y, slacks, multipliers) -> ResidualReport:
    """Raw KKT residuals of a candidate point on the original program data."""
    y = np.asarray(y, dtype=float)
    prim = np.array([
        np.linalg.norm(blk.evaluate(y) - S, 'fro')
        for blk, S in zip(program.blocks, slacks)
    ])
    adj = np.zeros(program.num_variables)
    for blk, M in zip(program.blocks, multipliers):
        np.add.at(adj, blk.var_idx, -np.einsum('iab,ab->i', blk.coeffs, M))
    dual = float(np.linalg.norm(program.c - adj))
    comp = np.array([float(np.vdot(S, M)) for S, M in zip(slacks, multipliers)])
    return ResidualReport(primal_residuals=prim, dual_residual=dual, complementarity=comp)


# ----------------------------------------------------------------------
# internal helpers
# ----------------------------------------------------------------------

def _scaled_data(program: ConicProgram):
    """Per-block and per-variable equilibration; exact reformulation."""
    p = program.num_variables
    sblk, F0s, idxs, Cs = [], [], [], []
    for blk in program.blocks:
        s = 1.0 + np.linalg.norm(blk.F0, 'fro')
        sblk.append(s)
        F0s.append(blk.F0 / s)
        idxs.append(np.asarray(blk.var_idx, dtype=int))
        Cs.append(blk.coeffs / s)
    norms = np.zeros(p)
    for idx, C in zip(idxs, Cs):
        np.maximum.at(norms, idx, np.linalg.norm(C.reshape(C.shape[0], -1), axis=1))
    dvar = np.where(norms > 1e-12, norms, 1.0)
    Cs = [C / dvar[idx][:, None, None] for idx, C in zip(idxs, Cs)]
    return program.c / dvar, F0s, idxs, Cs, np.array(sblk), dvar


def _max_step(Xs, dXs):
    """Largest a with X + a dX staying PSD, per the smallest block bound."""
    a = np.inf
    for X, dX in zip(Xs, dXs):
        try:
            L = np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            return 0.0
        W = sla.solve_triangular(L, dX, lower=True, check_finite=False)
        W = sla.solve_triangular(L, W.T, lower=True, check_finite=False)
        lam = np.linalg.eigvalsh(0.5 * (W + W.T))[0]
        if lam < 0:
            a = min(a, -1.0 / lam)
    return a


def _all_pd(mats):
    for X in mats:
        try:
            np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            return False
    return True


def solve(program: ConicProgram, opts: SolverOptions | None = None) -> SolverResult:
    """Run the interior-point iteration on an assembled conic program.

    Convergence is declared on the equilibrated program: relative gap below
    gap_tol and feasibility residuals (normalized by the data norms) below
    feas_tol.  The returned slacks, multipliers, and variables are mapped
    back to the original data; the run is deterministic for fixed inputs.
    """
    opts = opts or SolverOptions()
    t_start = time.perf_counter()
    for blk in program.blocks:
        if blk.F0.shape != (blk.size, blk.size):
            raise InputError(f"block '{blk.label}' has inconsistent F0 shape")
        if np.max(np.abs(blk.coeffs - blk.coeffs.transpose(0, 2, 1))) > 0:
            raise InputError(f"block '{blk.label}' has non-symmetric coefficients")

    c, F0s, idxs, Cs, sblk, dvar = _scaled_data(program)
    p = program.num_variables
    nb = len(F0s)
    ntot = sum(F.shape[0] for F in F0s)
    tau = 1.0 + max(max(np.max(np.abs(F0)) for F0 in F0s), np.max(np.abs(c)))
    S = [tau * np.eye(F0.shape[0]) for F0 in F0s]
    M = [tau * np.eye(F0.shape[0]) for F0 in F0s]
    y = np.zeros(p)
    norm_F0 = 1.0 + max(np.linalg.norm(F0) for F0 in F0s)
    norm_c = 1.0 + np.linalg.norm(c)
    tr_M0 = ntot * tau

    def adjoint(Mb):
        out = np.zeros(p)
        for idx, C, Mk in zip(idxs, Cs, Mb):
            np.add.at(out, idx, np.einsum('iab,ab->i', C, Mk))
        return out

    history = []
    best = None          # (merit, y, S, M, relgap, pres, dres, iter)
    best_iter_seen = -1
    status = STATUS_MAX_ITER
    diagnostics = ""
    it = 0
    step_taken = 0.0
    sigma = 0.0

    for it in range(opts.max_iterations):
        Rs = [F0 + np.einsum('i,iab->ab', y[idx], C) - Sb
              for F0, idx, C, Sb in zip(F0s, idxs, Cs, S)]
        rm = -c - adjoint(M)
        gap_abs = sum(float(np.vdot(Sb, Mb)) for Sb, Mb in zip(S, M))
        mu = gap_abs / ntot
        obj = float(c @ y)
        pobj = sum(float(np.vdot(F0, Mb)) for F0, Mb in zip(F0s, M))
        relgap = abs(gap_abs) / (1.0 + abs(obj) + abs(pobj))
        pres = max(np.linalg.norm(R, 'fro') for R in Rs) / norm_F0
        dres = float(np.linalg.norm(rm)) / norm_c
        min_eig_S = min(np.linalg.eigvalsh(Sb)[0] for Sb in S)
        min_eig_M = min(np.linalg.eigvalsh(Mb)[0] for Mb in M)
        history.append((it, relgap, pres, dres, step_taken, obj, sigma,
                        min_eig_S, min_eig_M))
        if opts.verbosity >= 1:
            print(f"[ipm] it {it:3d} obj {obj: .8e} gap {relgap:.2e} "
                  f"pres {pres:.2e} dres {dres:.2e}")

        merit = max(relgap, pres, dres)
        if best is None or merit < 0.9 * best[0]:
            best_iter_seen = it
        if best is None or merit < best[0]:
            best = (merit, y.copy(), [Sb.copy() for Sb in S],
                    [Mb.copy() for Mb in M], relgap, pres, dres, it)
        if relgap <= opts.gap_tol and pres <= opts.feas_tol and dres <= opts.feas_tol:
            status = STATUS_OPTIMAL
            best = (merit, y.copy(), [Sb.copy() for Sb in S],
                    [Mb.copy() for Mb in M], relgap, pres, dres, it)
            break

        # infeasibility of the LMI system: a PSD multiplier with vanishing
        # adjoint and strictly negative pairing with the constants
        tr_M = sum(float(np.trace(Mb)) for Mb in M)
        if tr_M > 1e8 * tr_M0:
            adj_norm = np.linalg.norm(adjoint(M)) / tr_M
            if adj_norm < 1e-9 * norm_c and pobj / tr_M < -1e-10:
                status = STATUS_PRIMAL_INFEASIBLE
                diagnostics = ("constraints inconsistent: normalized multiplier "
                               f"certificate with <F0, M>/tr(M) = {pobj / tr_M:.3e}")
                best = (merit, y.copy(), [Sb.copy() for Sb in S],
                        [Mb / tr_M for Mb in M], relgap, pres, dres, it)
                break
        # unbounded objective: an improving ray in y
        y_norm = np.linalg.norm(y)
        if y_norm > 1e8 * tau:
            yhat = y / y_norm
            ray_ok = all(
                np.linalg.eigvalsh(np.einsum('i,iab->ab', yhat[idx], C))[0] > -1e-9
                for idx, C in zip(idxs, Cs))
            if ray_ok and c @ yhat > 1e-9:
                status = STATUS_DUAL_INFEASIBLE
                diagnostics = "objective unbounded above: improving feasible ray in y"
                break
        if it - best_iter_seen > opts.stall_iterations:
            diagnostics = f"no merit progress over {opts.stall_iterations} iterations"
            break

        # block factorizations
        Sinv = []
        broke = False
        for Sb in S:
            try:
                cf = sla.cho_factor(Sb, check_finite=False)
            except np.linalg.LinAlgError:
                broke = True
                break
            Sinv.append(sla.cho_solve(cf, np.eye(Sb.shape[0]), check_finite=False))
        if broke:
            diagnostics = "slack block lost positive definiteness"
            break

        # Schur complement: B_ij = sum_b tr(F_i S^-1 F_j M)
        B = np.zeros((p, p))
        for bi in range(nb):
            T = Sinv[bi] @ Cs[bi] @ M[bi]
            Bloc = np.einsum('iab,jba->ij', Cs[bi], T)
            B[np.ix_(idxs[bi], idxs[bi])] += 0.5 * (Bloc + Bloc.T)
        dB = np.sqrt(np.maximum(np.diag(B), 1e-300))
        Bs = B / dB[:, None] / dB[None, :]
        cho = None
        for ridge in (0.0, 1e-14, 1e-12, 1e-10, 1e-8):
            try:
                cho = sla.cho_factor(Bs + ridge * np.eye(p), check_finite=False)
                break
            except np.linalg.LinAlgError:
                continue
        if cho is None:
            try:
                lu = sla.lu_factor(Bs + 1e-8 * np.eye(p), check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                diagnostics = "Schur complement unfactorable"
                break
            def schur_solve(rhs, lu=lu, dB=dB):
                return sla.lu_solve(lu, rhs / dB, check_finite=False) / dB
        else:
            def schur_solve(rhs, cho=cho, Bs=Bs, dB=dB):
                r0 = rhs / dB
                x = sla.cho_solve(cho, r0, check_finite=False)
                for _ in range(2):
                    x += sla.cho_solve(cho, r0 - Bs @ x, check_finite=False)
                return x / dB

        def schur_rhs(sigma_mu, corr=None):
            rhs = np.zeros(p)
            for bi in range(nb):
                Kmat = sigma_mu * Sinv[bi] - Sinv[bi] @ (Rs[bi] @ M[bi])
                if corr is not None:
                    Kmat = Kmat - Sinv[bi] @ (corr[0][bi] @ corr[1][bi])
                rhs[idxs[bi]] += np.einsum('iab,ba->i', Cs[bi], Kmat)
            return rhs + c

        def directions(sigma_mu, corr=None):
            dy = schur_solve(schur_rhs(sigma_mu, corr))
            dS, dM = [], []
            for bi in range(nb):
                dSb = np.einsum('i,iab->ab', dy[idxs[bi]], Cs[bi]) + Rs[bi]
                Kmat = sigma_mu * Sinv[bi] - M[bi] - Sinv[bi] @ (dSb @ M[bi])
                if corr is not None:
                    Kmat = Kmat - Sinv[bi] @ (corr[0][bi] @ corr[1][bi])
                dS.append(dSb)
                dM.append(0.5 * (Kmat + Kmat.T))
            return dy, dS, dM

        if opts.predictor_corrector:
            dy_a, dS_a, dM_a = directions(0.0)
            a_s = min(1.0, _max_step(S, dS_a))
            a_m = min(1.0, _max_step(M, dM_a))
            mu_aff = sum(float(np.vdot(S[b] + a_s * dS_a[b], M[b] + a_m * dM_a[b]))
                         for b in range(nb)) / ntot
            expo = max(1.0, 3.0 * min(a_s, a_m) ** 2)
            sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** expo, 1e-10))
            dy, dS, dM = directions(sigma * mu, corr=(dS_a, dM_a))
        else:
            sigma = 0.3
            dy, dS, dM = directions(sigma * mu)

        frac = min(0.999, max(opts.step_fraction, 1.0 - np.sqrt(max(relgap, 1e-14))))
        a_s = min(1.0, frac * _max_step(S, dS))
        a_m = min(1.0, frac * _max_step(M, dM))
        # never land on a numerically indefinite point: halve until both
        # cones verify by factorization
        accepted = False
        for _ in range(8):
            S_new = [S[b] + a_s * dS[b] for b in range(nb)]
            M_new = [M[b] + a_m * dM[b] for b in range(nb)]
            if _all_pd(S_new) and _all_pd(M_new):
                accepted = True
                break
            a_s *= 0.5
            a_m *= 0.5
        step_taken = min(a_s, a_m)
        if not accepted or step_taken < 1e-10:
            diagnostics = "step length collapsed"
            break
        y = y + a_s * dy
        S = S_new
        M = M_new
    else:
        it = opts.max_iterations

    merit, yb, Sb_list, Mb_list, relgap, pres, dres, it_best = best
    if status not in (STATUS_PRIMAL_INFEASIBLE, STATUS_DUAL_INFEASIBLE):
        if relgap <= opts.gap_tol and pres <= opts.feas_tol and dres <= opts.feas_tol:
            status = STATUS_OPTIMAL
        elif it >= opts.max_iterations - 1:
            status = STATUS_MAX_ITER
        elif diagnostics and "progress" in diagnostics:
            status = STATUS_MAX_ITER
        elif diagnostics:
            status = STATUS_NUMERICAL

    # undo the internal rescaling
    y_out = yb / dvar
    slacks = [s * Sb for s, Sb in zip(sblk, Sb_list)]
    multipliers = [Mb / s for s, Mb in zip(sblk, Mb_list)]
    return SolverResult(
        status=status,
        y=y_out,
        slacks=slacks,
        multipliers=multipliers,
        gap=relgap,
        primal_residual=pres,
        dual_residual=dres,
        iterations=it_best if status == STATUS_OPTIMAL else it,
        wall_time=time.perf_counter() - t_start,
        objective=float(program.c @ y_out),
        history=history,
        diagnostics=diagnostics,
    )
