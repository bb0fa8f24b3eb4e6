"""Dense primal-dual interior-point solver for small block-diagonal SDPs.

Problems are in standard primal form

    minimize    sum_j <C_j, X_j> + c_f' f
    subject to  sum_j <A_ij, X_j> + B_i' f = b_i,   i = 1..m
                X_j >= 0 (PSD blocks),  f free,

solved by a Mehrotra-style predictor-corrector on the homogeneous self-dual
embedding with Nesterov-Todd scaling.  The embedding yields improving-ray
witnesses on infeasibility, and the free block is carried through the Newton
system directly rather than being split into cone variables.

Every "optimal" status is re-verified by ``verify_solution``, which recomputes
all residuals from the raw problem data and shares no code with the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve_triangular


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-7
    max_iterations: int = 100
    step_fraction: float = 0.98

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step_fraction must be in (0, 1)")


class SdpProblem:
    """Block-diagonal SDP data in standard primal form.

    A_blocks[j] has shape (m, n_j, n_j) with symmetric slices; A_free has shape
    (m, free_dim).  C_blocks[j] is the (n_j, n_j) objective matrix for block j.
    """

    def __init__(
        self,
        block_dims: Sequence[int],
        free_dim: int,
        C_blocks: Sequence[np.ndarray],
        c_free: np.ndarray,
        A_blocks: Sequence[np.ndarray],
        A_free: np.ndarray,
        b: np.ndarray,
    ):
        self.block_dims = tuple(int(d) for d in block_dims)
        self.free_dim = int(free_dim)
        self.C_blocks = [np.ascontiguousarray(np.asarray(C, dtype=float)) for C in C_blocks]
        self.c_free = np.asarray(c_free, dtype=float).reshape(self.free_dim)
        self.A_blocks = [np.ascontiguousarray(np.asarray(A, dtype=float)) for A in A_blocks]
        self.b = np.asarray(b, dtype=float)
        self.A_free = np.asarray(A_free, dtype=float).reshape(self.b.shape[0], self.free_dim)
        self._validate()
        # Flattened constraint matrices, shared by the solver and verification.
        self._A_flat = [A.reshape(A.shape[0], -1) for A in self.A_blocks]

    def _validate(self):
        m = self.num_constraints
        if any(d < 1 for d in self.block_dims):
            raise ValueError("block dimensions must be >= 1")
        if len(self.C_blocks) != len(self.block_dims) or len(self.A_blocks) != len(self.block_dims):
            raise ValueError("objective/constraint block count mismatch")
        if self.A_free.shape != (m, self.free_dim):
            raise ValueError(f"A_free must have shape ({m}, {self.free_dim})")
        for j, d in enumerate(self.block_dims):
            if self.C_blocks[j].shape != (d, d):
                raise ValueError(f"C block {j} has wrong shape")
            if self.A_blocks[j].shape != (m, d, d):
                raise ValueError(f"A block {j} has wrong shape")
            for mat, name in ((self.C_blocks[j], "C"), (self.A_blocks[j], "A")):
                if not np.isfinite(mat).all():
                    raise ValueError(f"non-finite entries in {name} block {j}")
            if np.max(np.abs(self.C_blocks[j] - self.C_blocks[j].T)) > 1e-12:
                raise ValueError(f"C block {j} is not symmetric")
            asym = np.max(np.abs(self.A_blocks[j] - np.transpose(self.A_blocks[j], (0, 2, 1))))
            if asym > 1e-12:
                raise ValueError(f"A block {j} contains non-symmetric slices")
        if not (np.isfinite(self.b).all() and np.isfinite(self.A_free).all() and np.isfinite(self.c_free).all()):
            raise ValueError("non-finite entries in b / A_free / c_free")

    @property
    def num_constraints(self) -> int:
        return self.b.shape[0]

    def apply_A(self, X_blocks: Sequence[np.ndarray], f: np.ndarray) -> np.ndarray:
        """A(X) + B f."""
        out = self.A_free @ f if self.free_dim else np.zeros(self.num_constraints)
        for Af, X in zip(self._A_flat, X_blocks):
            out = out + Af @ np.asarray(X).ravel()
        return out

    def apply_At(self, y: np.ndarray) -> list[np.ndarray]:
        """Adjoint per block: A*_j(y) = sum_i y_i A_ij."""
        return [(y @ Af).reshape(d, d) for Af, d in zip(self._A_flat, self.block_dims)]

    def objective_value(self, X_blocks: Sequence[np.ndarray], f: np.ndarray) -> float:
        val = float(self.c_free @ f) if self.free_dim else 0.0
        for C, X in zip(self.C_blocks, X_blocks):
            val += float(np.tensordot(C, X))
        return val


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | dual_infeasible | numerical_failure
    X_blocks: list[np.ndarray] = field(default_factory=list)
    free_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    S_blocks: list[np.ndarray] = field(default_factory=list)
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    primal_feas: float = float("nan")
    dual_feas: float = float("nan")
    duality_gap: float = float("nan")
    iterations: int = 0
    # Improving-ray witness on infeasible statuses: {'y': ...} certifies primal
    # infeasibility, {'X_blocks': ..., 'free_values': ...} dual infeasibility.
    certificate: dict = field(default_factory=dict)


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def _min_eig_sym(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_sym(mat))[0])


def verify_solution(prob: SdpProblem, sol: SdpSolution, tol: float) -> dict:
    """Recompute KKT residuals of a claimed-optimal solution from scratch.

    Uses only raw problem data and the returned (X, f, y, S); no solver state.
    """
    pres_vec = prob.apply_A(sol.X_blocks, sol.free_values) - prob.b
    primal_feas = float(np.linalg.norm(pres_vec, np.inf)) / (1.0 + float(np.linalg.norm(prob.b, np.inf)))

    At = prob.apply_At(sol.y)
    dnum = 0.0
    cnorm = max((float(np.max(np.abs(C))) for C in prob.C_blocks), default=0.0)
    for Aty, S, C in zip(At, sol.S_blocks, prob.C_blocks):
        dnum = max(dnum, float(np.max(np.abs(Aty + S - C))))
    if prob.free_dim:
        dnum = max(dnum, float(np.max(np.abs(prob.A_free.T @ sol.y - prob.c_free))))
        cnorm = max(cnorm, float(np.max(np.abs(prob.c_free), initial=0.0)))
    dual_feas = dnum / (1.0 + cnorm)

    pobj = prob.objective_value(sol.X_blocks, sol.free_values)
    dobj = float(prob.b @ sol.y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

    min_eig = 0.0
    for X in sol.X_blocks:
        min_eig = min(min_eig, _min_eig_sym(X))
    for S in sol.S_blocks:
        min_eig = min(min_eig, _min_eig_sym(S))

    return {
        "primal_feas": primal_feas,
        "dual_feas": dual_feas,
        "duality_gap": gap,
        "min_eigenvalue": min_eig,
        "primal_objective": pobj,
        "dual_objective": dobj,
        "ok": bool(primal_feas <= tol and dual_feas <= tol and gap <= tol and min_eig >= -tol),
    }


class _NTScaling:
    """Nesterov-Todd scaling for one block: W = R R', W S W = X, V diagonal."""

    def __init__(self, X: np.ndarray, S: np.ndarray):
        Lx = np.linalg.cholesky(X)
        M = _sym(Lx.T @ S @ Lx)
        lam2, U = np.linalg.eigh(M)
        lam2 = np.maximum(lam2, 1e-300)
        self.lam = np.sqrt(np.sqrt(lam2))  # lam**2 are the eigenvalues of V
        self.R = Lx @ U / self.lam[None, :]
        self.Rt = self.R.T
        self.Rinv = (U * self.lam[None, :]).T @ solve_triangular(Lx, np.eye(Lx.shape[0]), lower=True)
        self.W = self.R @ self.Rt
        self.v = self.lam * self.lam  # diagonal of V

    def lyap_solve(self, M: np.ndarray) -> np.ndarray:
        """Solve (V Z + Z V)/2 = M for Z with V = diag(self.v)."""
        denom = 0.5 * (self.v[:, None] + self.v[None, :])
        return M / denom

    def scale_down(self, M: np.ndarray, transpose: bool) -> np.ndarray:
        """R^-1 M R^-T (transpose=False) or R' M R (transpose=True)."""
        if transpose:
            return self.Rt @ M @ self.R
        return self.Rinv @ M @ self.Rinv.T


def _max_step_psd(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha*dX >= 0, for X > 0 (inf if dX is PSD-safe)."""
    Lx = np.linalg.cholesky(X)
    E = solve_triangular(Lx, dX, lower=True)
    E = solve_triangular(Lx, E.T, lower=True)
    lam_min = float(np.linalg.eigvalsh(_sym(E))[0])
    if lam_min >= -1e-14:
        return np.inf
    return 1.0 / (-lam_min)


def solve(prob: SdpProblem, cfg: SolverConfig | None = None) -> SdpSolution:
    """Solve an SdpProblem; statuses other than 'optimal' carry diagnostics.

    The returned status is 'optimal' only if independently recomputed residuals
    pass the configured tolerance.
    """
    cfg = cfg or SolverConfig()
    m = prob.num_constraints
    nb = len(prob.block_dims)
    nf = prob.free_dim
    cone_dim = sum(prob.block_dims) + 1  # + tau/kappa pair

    X = [np.eye(d) for d in prob.block_dims]
    S = [np.eye(d) for d in prob.block_dims]
    y = np.zeros(m)
    f = np.zeros(nf)
    tau, kappa = 1.0, 1.0

    b, c_free = prob.b, prob.c_free
    C = prob.C_blocks
    A_flat = prob._A_flat
    B = prob.A_free

    def residuals():
        Rp = prob.apply_A(X, f) - tau * b
        At = prob.apply_At(y)
        Rd = [At[j] + S[j] - tau * C[j] for j in range(nb)]
        Rf = (B.T @ y - tau * c_free) if nf else np.zeros(0)
        Rg = float(b @ y - prob.objective_value(X, f) - kappa)
        return Rp, Rd, Rf, Rg

    best: dict | None = None  # best-scoring iterate seen, for a robust final answer

    def snapshot(score: float):
        nonlocal best
        if best is None or score < best["score"]:
            best = {
                "score": score,
                "X": [Xj.copy() for Xj in X],
                "S": [Sj.copy() for Sj in S],
                "y": y.copy(),
                "f": f.copy(),
                "tau": tau,
            }

    def finalize_optimal(iterations: int) -> SdpSolution:
        assert best is not None
        t = best["tau"]
        sol = SdpSolution(
            status="optimal",
            X_blocks=[_sym(Xj) / t for Xj in best["X"]],
            free_values=best["f"] / t,
            y=best["y"] / t,
            S_blocks=[_sym(Sj) / t for Sj in best["S"]],
            iterations=iterations,
        )
        res = verify_solution(prob, sol, cfg.tolerance * 10)
        sol.primal_objective = res["primal_objective"]
        sol.dual_objective = res["dual_objective"]
        sol.primal_feas = res["primal_feas"]
        sol.dual_feas = res["dual_feas"]
        sol.duality_gap = res["duality_gap"]
        if not res["ok"]:
            sol.status = "numerical_failure"
        return sol

    def check_infeasibility(iterations: int) -> SdpSolution | None:
        # tau -> 0 along the embedding: classify by the sign of the homogeneous
        # objectives, and hand back a scaled improving ray.
        by = float(b @ y)
        cx = prob.objective_value(X, f)
        if by > cfg.tolerance:
            yc = y / by
            Sc = [Sj / by for Sj in S]
            sol = SdpSolution(status="infeasible", y=yc, S_blocks=Sc, iterations=iterations)
            sol.certificate = {"y": yc, "S_blocks": Sc}
            return sol
        if cx < -cfg.tolerance:
            scale = -1.0 / cx
            Xc = [_sym(Xj) * scale for Xj in X]
            fc = f * scale
            sol = SdpSolution(status="dual_infeasible", X_blocks=Xc, free_values=fc, iterations=iterations)
            sol.certificate = {"X_blocks": Xc, "free_values": fc}
            return sol
        return None

    mu0 = (sum(float(np.trace(Xj @ Sj)) for Xj, Sj in zip(X, S)) + tau * kappa) / cone_dim

    for iteration in range(1, cfg.max_iterations + 1):
        Rp, Rd, Rf, Rg = residuals()
        mu = (sum(float(np.tensordot(Xj, Sj)) for Xj, Sj in zip(X, S)) + tau * kappa) / cone_dim

        # Convergence of the de-homogenized iterate.
        pres = float(np.linalg.norm(Rp / tau, np.inf)) / (1.0 + float(np.linalg.norm(b, np.inf)))
        cnorm = max((float(np.max(np.abs(Cj))) for Cj in C), default=0.0)
        if nf:
            cnorm = max(cnorm, float(np.max(np.abs(c_free), initial=0.0)))
        dres = max((float(np.max(np.abs(Rdj / tau))) for Rdj in Rd), default=0.0)
        if nf:
            dres = max(dres, float(np.max(np.abs(Rf / tau), initial=0.0)))
        dres /= 1.0 + cnorm
        pobj = prob.objective_value(X, f) / tau
        dobj = float(b @ y) / tau
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        snapshot(max(pres, dres, gap))
        if pres <= cfg.tolerance and dres <= cfg.tolerance and gap <= cfg.tolerance:
            return finalize_optimal(iteration - 1)
        if tau < 1e-10 * max(1.0, kappa) or (mu < 1e-12 * mu0 and tau * mu0 < 1e-8 * kappa):
            found = check_infeasibility(iteration - 1)
            if found is not None:
                return found
            return SdpSolution(status="numerical_failure", iterations=iteration - 1)

        def fail(iters: int) -> SdpSolution:
            # A late-stage breakdown may still leave a verifiable iterate behind.
            if best is not None:
                cand = finalize_optimal(iters)
                if cand.status == "optimal":
                    return cand
            return SdpSolution(status="numerical_failure", iterations=iters)

        try:
            scal = [_NTScaling(X[j], S[j]) for j in range(nb)]
        except np.linalg.LinAlgError:
            return fail(iteration - 1)

        WAW_flat = []
        Mmat = np.zeros((m, m))
        u = np.zeros(m)
        cWc = 0.0
        for j in range(nb):
            d = prob.block_dims[j]
            W = scal[j].W
            Aj = prob.A_blocks[j]
            WAW = np.matmul(W[None, :, :], np.matmul(Aj, W[None, :, :]))
            WAWf = WAW.reshape(m, d * d)
            WAW_flat.append(WAWf)
            Mmat += A_flat[j] @ WAWf.T
            WCW = W @ C[j] @ W
            u += A_flat[j] @ WCW.ravel()
            cWc += float(np.tensordot(C[j], WCW))

        # KKT coefficient matrix in (dy, df, dtau).
        dim = m + nf + 1
        K = np.zeros((dim, dim))
        K[:m, :m] = Mmat
        if nf:
            K[:m, m:m + nf] = B
            K[m:m + nf, :m] = B.T
            K[m:m + nf, -1] = -c_free
        K[:m, -1] = -(u + b)
        K[-1, :m] = b - u
        if nf:
            K[-1, m:m + nf] = -c_free
        K[-1, -1] = cWc + kappa / tau

        try:
            K_fact = lu_factor(K)
        except (np.linalg.LinAlgError, ValueError):
            K_fact = None
        if K_fact is None or not np.isfinite(K_fact[0]).all():
            try:
                K_fact = lu_factor(K + 1e-12 * np.eye(dim))
            except (np.linalg.LinAlgError, ValueError):
                return fail(iteration - 1)

        def solve_kkt(rhs: np.ndarray) -> np.ndarray:
            # One round of iterative refinement keeps late-stage directions
            # accurate when the scaled system becomes ill-conditioned; fall back
            # to a least-squares solve if the factorization was unusable.
            x = lu_solve(K_fact, rhs, check_finite=False)
            if np.isfinite(x).all():
                r = rhs - K @ x
                if np.isfinite(r).all():
                    dx = lu_solve(K_fact, r, check_finite=False)
                    if np.isfinite(dx).all():
                        x = x + dx
                if np.isfinite(x).all():
                    resid = float(np.linalg.norm(rhs - K @ x))
                    if resid <= 1e-6 * (1.0 + float(np.linalg.norm(rhs))):
                        return x
            return np.linalg.lstsq(K, rhs, rcond=None)[0]

        def newton(theta: float, G_blocks, rtk: float):
            rhs = np.zeros(dim)
            AG = np.zeros(m)
            cG = 0.0
            for j in range(nb):
                AG += A_flat[j] @ G_blocks[j].ravel()
                WRdW = scal[j].W @ Rd[j] @ scal[j].W
                AG += theta * (A_flat[j] @ WRdW.ravel())
                cG += float(np.tensordot(C[j], G_blocks[j] + theta * WRdW))
            rhs[:m] = -theta * Rp - AG
            if nf:
                rhs[m:m + nf] = -theta * Rf
            rhs[-1] = -theta * Rg + cG + rtk / tau
            sol_vec = solve_kkt(rhs)
            dy = sol_vec[:m]
            df = sol_vec[m:m + nf] if nf else np.zeros(0)
            dtau = float(sol_vec[-1])
            At_dy = prob.apply_At(dy)
            dS = [-theta * Rd[j] + dtau * C[j] - At_dy[j] for j in range(nb)]
            dX = [G_blocks[j] - scal[j].W @ dS[j] @ scal[j].W for j in range(nb)]
            dX = [_sym(M) for M in dX]
            dS = [_sym(M) for M in dS]
            dkappa = (rtk - kappa * dtau) / tau
            return dX, df, dy, dS, dtau, dkappa

        def max_step(dX, dS, dtau, dkappa):
            alpha = np.inf
            for j in range(nb):
                alpha = min(alpha, _max_step_psd(X[j], dX[j]), _max_step_psd(S[j], dS[j]))
            if dtau < 0:
                alpha = min(alpha, tau / (-dtau))
            if dkappa < 0:
                alpha = min(alpha, kappa / (-dkappa))
            return alpha

        # Predictor (affine scaling direction).
        G_aff = [-_sym(Xj) for Xj in X]
        aff = newton(1.0, G_aff, -tau * kappa)
        if any(not np.isfinite(d).all() for d in aff[0]) or not np.isfinite(aff[4]):
            return fail(iteration - 1)
        alpha_aff = min(1.0, cfg.step_fraction * max_step(aff[0], aff[3], aff[4], aff[5]))
        mu_aff = (
            sum(
                float(np.tensordot(X[j] + alpha_aff * aff[0][j], S[j] + alpha_aff * aff[3][j]))
                for j in range(nb)
            )
            + (tau + alpha_aff * aff[4]) * (kappa + alpha_aff * aff[5])
        ) / cone_dim
        sigma = min(0.99, max(0.0, (mu_aff / mu) ** 3))

        # Corrector with Mehrotra second-order term, formed in scaled space.
        G_comb = []
        for j in range(nb):
            sc = scal[j]
            Dxa = sc.scale_down(aff[0][j], transpose=False)
            Dsa = sc.scale_down(aff[3][j], transpose=True)
            V2 = np.diag(sc.v * sc.v)
            RHS = sigma * mu * np.eye(len(sc.v)) - V2 - _sym(Dxa @ Dsa)
            G_comb.append(_sym(sc.R @ sc.lyap_solve(RHS) @ sc.Rt))
        rtk = sigma * mu - tau * kappa - aff[4] * aff[5]
        theta = 1.0 - sigma
        comb = newton(theta, G_comb, rtk)
        dX, df, dy, dS, dtau, dkappa = comb
        if any(not np.isfinite(d).all() for d in dX) or not np.isfinite(dtau):
            return fail(iteration - 1)

        alpha = min(1.0, cfg.step_fraction * max_step(dX, dS, dtau, dkappa))
        if alpha <= 1e-14:
            return fail(iteration)

        for j in range(nb):
            X[j] = _sym(X[j] + alpha * dX[j])
            S[j] = _sym(S[j] + alpha * dS[j])
        y = y + alpha * dy
        if nf:
            f = f + alpha * df
        tau += alpha * dtau
        kappa += alpha * dkappa
        if tau <= 0 or kappa <= 0 or not np.isfinite(tau) or not np.isfinite(kappa):
            return fail(iteration)

    # Iteration budget exhausted: classify if possible, otherwise fail loudly.
    found = check_infeasibility(cfg.max_iterations)
    if found is not None and tau < 1e-6 * max(1.0, kappa):
        return found
    if best is not None:
        cand = finalize_optimal(cfg.max_iterations)
        if cand.status == "optimal":
            return cand
    return SdpSolution(status="numerical_failure", iterations=cfg.max_iterations)


# ---------------------------------------------------------------------------
# Sparse text dump (debug interface, also consumed by the tests as a golden
# format): block sizes, then one line per nonzero entry, then the rhs vector.
#
#   sdp-dump v1
#   blocks d1 d2 ... dk
#   free nf
#   m <num constraints>
#   <constraint> <block> <row> <col> <value>   # constraint 0 = objective,
#                                              # block k = free block (col ignored)
#   rhs b1 ... bm
#
# Indices are zero-based; only upper-triangle entries are written for PSD blocks.
# ---------------------------------------------------------------------------


def write_problem_text(prob: SdpProblem) -> str:
    lines = ["sdp-dump v1"]
    lines.append("blocks " + " ".join(str(d) for d in prob.block_dims))
    lines.append(f"free {prob.free_dim}")
    lines.append(f"m {prob.num_constraints}")
    nb = len(prob.block_dims)

    def emit(ci: int, bj: int, mat: np.ndarray):
        d = mat.shape[0]
        for r in range(d):
            for c in range(r, d):
                v = mat[r, c]
                if v != 0.0:
                    lines.append(f"{ci} {bj} {r} {c} {v:.17g}")

    for j, Cj in enumerate(prob.C_blocks):
        emit(0, j, Cj)
    for k in range(prob.free_dim):
        if prob.c_free[k] != 0.0:
            lines.append(f"0 {nb} {k} 0 {prob.c_free[k]:.17g}")
    for i in range(prob.num_constraints):
        for j in range(nb):
            emit(i + 1, j, prob.A_blocks[j][i])
        for k in range(prob.free_dim):
            v = prob.A_free[i, k]
            if v != 0.0:
                lines.append(f"{i + 1} {nb} {k} 0 {v:.17g}")
    lines.append("rhs " + " ".join(f"{v:.17g}" for v in prob.b))
    return "\n".join(lines) + "\n"


def read_problem_text(text: str) -> SdpProblem:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if lines[0].strip() != "sdp-dump v1":
        raise ValueError("unrecognized dump header")
    dims = tuple(int(t) for t in lines[1].split()[1:])
    nf = int(lines[2].split()[1])
    m = int(lines[3].split()[1])
    nb = len(dims)
    C_blocks = [np.zeros((d, d)) for d in dims]
    c_free = np.zeros(nf)
    A_blocks = [np.zeros((m, d, d)) for d in dims]
    A_free = np.zeros((m, nf))
    b = np.zeros(m)
    for ln in lines[4:]:
        parts = ln.split()
        if parts[0] == "rhs":
            b = np.array([float(v) for v in parts[1:]])
            continue
        ci, bj, r, c = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
        v = float(parts[4])
        if bj == nb:
            if ci == 0:
                c_free[r] = v
            else:
                A_free[ci - 1, r] = v
        else:
            if ci == 0:
                C_blocks[bj][r, c] = v
                C_blocks[bj][c, r] = v
            else:
                A_blocks[bj][ci - 1, r, c] = v
                A_blocks[bj][ci - 1, c, r] = v
    return SdpProblem(dims, nf, C_blocks, c_free, A_blocks, A_free, b)
