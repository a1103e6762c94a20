"""Dense interior-point solver for the conic programs this package builds.

The method is a primal-dual path-following algorithm on the homogeneous
self-dual embedding, with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step, specialized to the cone product
(nonnegative orthant) x (dense PSD blocks) with free decision variables
and optional linear equalities.

Internally the user's maximization

    maximize  c_u . x   s.t.  eq_A x = eq_b,  S_k(x) >= 0,  G_u x + h_u >= 0

is posed in the inequality ("conelp") form

    minimize  c . x   s.t.  A x = b,  G x + s = h,  s in K

with c = -c_u, G stacking the negated nonneg rows and the negated
svec'd PSD coefficient maps, and h the corresponding constant terms.
The embedding iterates (x, y, z, s, tau, kappa); tau > 0 at convergence
yields the solution (x/tau, y/tau, z/tau), while a vanishing tau with
kappa > 0 certifies infeasibility or unboundedness.  All residuals of
the embedding are linear in the iterates, so a unit Newton step cancels
them exactly and a damped step scales them by (1 - alpha).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram, SolverResult, svec_length

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SolverOptions:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    step_frac: float = 0.99
    refine: int = 1
    equilibrate: bool = True
    verbose: bool = False


# -- symmetric vectorization -------------------------------------------------


def _svec_maps(m: int):
    """Index arrays mapping an m x m symmetric matrix to/from svec order.

    svec stacks the upper triangle column by column with off-diagonal
    entries scaled by sqrt(2), so inner products and PSD-ness carry over.
    """
    iu, ju = [], []
    for j in range(m):
        for i in range(j + 1):
            iu.append(i)
            ju.append(j)
    I = np.asarray(iu)
    J = np.asarray(ju)
    scale = np.where(I == J, 1.0, SQRT2)
    return I, J, scale


def svec(mat: np.ndarray, I, J, scale) -> np.ndarray:
    return mat[I, J] * scale


def smat(vec: np.ndarray, I, J, scale, m: int) -> np.ndarray:
    out = np.zeros((m, m))
    vals = vec / scale
    out[I, J] = vals
    out[J, I] = vals
    return out


class _Cone:
    """Dimensions plus svec index caches for the cone K."""

    def __init__(self, n_nonneg: int, psd_sizes: list[int]):
        self.n_nonneg = n_nonneg
        self.psd_sizes = psd_sizes
        self.maps = [_svec_maps(m) for m in psd_sizes]
        self.offsets = []
        off = n_nonneg
        for m in psd_sizes:
            self.offsets.append(off)
            off += svec_length(m)
        self.dim = off
        self.degree = n_nonneg + sum(psd_sizes)

    def identity(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[: self.n_nonneg] = 1.0
        for m, off, (I, J, scale) in zip(self.psd_sizes, self.offsets, self.maps):
            e[off : off + svec_length(m)] = svec(np.eye(m), I, J, scale)
        return e

    def split(self, v: np.ndarray):
        """(nonneg part, list of dense symmetric matrices)."""
        mats = []
        for m, off, (I, J, scale) in zip(self.psd_sizes, self.offsets, self.maps):
            mats.append(smat(v[off : off + svec_length(m)], I, J, scale, m))
        return v[: self.n_nonneg], mats


class _Scaling:
    """Nesterov-Todd scaling point for (s, z) in int K x int K.

    For the orthant, W = diag(d) with d = sqrt(s/z).  For a PSD block the
    scaling is the congruence by R satisfying R^T Z R = R^-1 S R^-T =
    diag(lam), computed from Cholesky factors of S and Z and one SVD; in
    the scaled coordinates both the slack and the dual become the same
    diagonal matrix diag(lam), which makes the Jordan-algebra solves and
    the step-to-boundary computations trivial.
    """

    def __init__(self, cone: _Cone, s: np.ndarray, z: np.ndarray):
        self.cone = cone
        sl, smats = cone.split(s)
        zl, zmats = cone.split(z)
        if np.any(sl <= 0) or np.any(zl <= 0):
            raise FloatingPointError("orthant iterate left the cone")
        self.d = np.sqrt(sl / zl)
        self.lam_nonneg = np.sqrt(sl * zl)
        self.R = []
        self.Rinv = []
        self.P = []  # R R^T
        self.Pinv = []  # (R R^T)^{-1} = R^-T R^-1
        self.lam_psd = []
        for S, Z in zip(smats, zmats):
            Ls = np.linalg.cholesky(S)
            Lz = np.linalg.cholesky(Z)
            U, sig, Vt = np.linalg.svd(Lz.T @ Ls)
            if np.any(sig <= 0) or not np.all(np.isfinite(sig)):
                raise FloatingPointError("PSD iterate left the cone")
            R = Ls @ (Vt.T / np.sqrt(sig))
            Rinv = (Vt.T * np.sqrt(sig)).T @ np.linalg.inv(Ls)
            self.R.append(R)
            self.Rinv.append(Rinv)
            self.P.append(R @ R.T)
            self.Pinv.append(Rinv.T @ Rinv)
            self.lam_psd.append(sig)

    # all maps below act on full cone-space vectors

    def _congruence(self, v: np.ndarray, orthant_mul: np.ndarray, mats) -> np.ndarray:
        cone = self.cone
        out = np.empty_like(v)
        out[: cone.n_nonneg] = v[: cone.n_nonneg] * orthant_mul
        for k, (m, off, (I, J, scale)) in enumerate(zip(cone.psd_sizes, cone.offsets, cone.maps)):
            M = smat(v[off : off + svec_length(m)], I, J, scale, m)
            T = mats[k]
            out[off : off + svec_length(m)] = svec(T @ M @ T.T, I, J, scale)
        return out

    def W(self, v):  # z-side scaling: R^T Z R
        return self._congruence(v, self.d, [R.T for R in self.R])

    def WT(self, v):  # adjoint: R Z R^T
        return self._congruence(v, self.d, self.R)

    def Winv_T(self, v):  # s-side scaling: R^-1 S R^-T
        return self._congruence(v, 1.0 / self.d, self.Rinv)

    def WTW(self, v):  # congruence by P = R R^T
        return self._congruence(v, self.d**2, self.P)

    def WTW_inv(self, v):  # congruence by P^{-1}
        return self._congruence(v, 1.0 / self.d**2, self.Pinv)

    def lam_vector(self) -> np.ndarray:
        cone = self.cone
        out = np.zeros(cone.dim)
        out[: cone.n_nonneg] = self.lam_nonneg
        for lam, m, off, (I, J, scale) in zip(self.lam_psd, cone.psd_sizes, cone.offsets, cone.maps):
            out[off : off + svec_length(m)] = svec(np.diag(lam), I, J, scale)
        return out

    def lam_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve lam o u = rhs in the Jordan algebra (lam is diagonal here)."""
        cone = self.cone
        out = np.empty_like(rhs)
        out[: cone.n_nonneg] = rhs[: cone.n_nonneg] / self.lam_nonneg
        for lam, m, off, (I, J, scale) in zip(self.lam_psd, cone.psd_sizes, cone.offsets, cone.maps):
            D = smat(rhs[off : off + svec_length(m)], I, J, scale, m)
            U = 2.0 * D / np.add.outer(lam, lam)
            out[off : off + svec_length(m)] = svec(U, I, J, scale)
        return out

    def jordan_product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        cone = self.cone
        out = np.empty_like(a)
        out[: cone.n_nonneg] = a[: cone.n_nonneg] * b[: cone.n_nonneg]
        for m, off, (I, J, scale) in zip(cone.psd_sizes, cone.offsets, cone.maps):
            A = smat(a[off : off + svec_length(m)], I, J, scale, m)
            B = smat(b[off : off + svec_length(m)], I, J, scale, m)
            out[off : off + svec_length(m)] = svec(0.5 * (A @ B + B @ A), I, J, scale)
        return out

    def max_step(self, scaled_dir: np.ndarray) -> float:
        """Largest alpha keeping lam + alpha * dir in the cone."""
        cone = self.cone
        alpha = np.inf
        d0 = scaled_dir[: cone.n_nonneg]
        neg = d0 < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-self.lam_nonneg[neg] / d0[neg])))
        for lam, m, off, (I, J, scale) in zip(self.lam_psd, cone.psd_sizes, cone.offsets, cone.maps):
            D = smat(scaled_dir[off : off + svec_length(m)], I, J, scale, m)
            root = 1.0 / np.sqrt(lam)
            w = np.linalg.eigvalsh((root[:, None] * D) * root[None, :])[0]
            if w < 0:
                alpha = min(alpha, 1.0 / -w)
        return alpha


@dataclass
class _CompiledPsd:
    """Per-variable sparse entry lists of one PSD block, for Schur assembly.

    per_var[j] = (rows, cols, vals) describing the symmetric coefficient
    matrix F_j; diagonal entries carry half weight so the symmetrized
    outer-product formula P F_j P = U V^T + V U^T applies uniformly.
    """

    size: int
    offset: int
    per_var: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]


class _KKT:
    """Factorization of the reduced Newton system for a fixed scaling.

    Eliminating the cone direction turns the 3x3 system

        [0   A^T  G^T ][ux]   [bx]
        [A   0    0   ][uy] = [by]
        [G   0  -W^T W][uz]   [bz]

    into a positive definite solve with H = G^T (W^T W)^{-1} G plus a
    Schur complement for the equality multipliers.  H is assembled
    blockwise: the PSD contribution per decision variable j is
    <F_i, P^{-1} F_j P^{-1}>, evaluated through rank-structured
    congruences of the sparse coefficient matrices.
    """

    def __init__(self, G: sp.csc_matrix, Gnn: np.ndarray, blocks: list[_CompiledPsd],
                 A: np.ndarray, scaling: _Scaling, cone: _Cone, refine: int):
        self.G = G
        self.A = A
        self.scaling = scaling
        self.cone = cone
        self.refine = refine
        n = G.shape[1]
        H = np.zeros((n, n))
        if cone.n_nonneg:
            H += (Gnn / (scaling.d**2)[:, None]).T @ Gnn
        for k, blk in enumerate(blocks):
            Pinv = scaling.Pinv[k]
            I, J, scale = cone.maps[k]
            cols = sorted(blk.per_var)
            chunk = max(1, int(4.0e6 / max(1, svec_length(blk.size))))
            Gblk = G[blk.offset : blk.offset + svec_length(blk.size), :]
            for start in range(0, len(cols), chunk):
                sel = cols[start : start + chunk]
                Q = np.empty((svec_length(blk.size), len(sel)))
                for t, j in enumerate(sel):
                    rows_j, cols_j, vals_j = blk.per_var[j]
                    U = Pinv[:, rows_j] * vals_j
                    V = Pinv[:, cols_j]
                    T = U @ V.T
                    T += T.T
                    Q[:, t] = svec(T, I, J, scale)
                # G rows carry -F_j scaled to svec; undo the sign on both factors
                H[:, sel] += -(Gblk.T @ Q)
        self._H = H
        self._chol = self._factor(H)
        if A.shape[0]:
            HiAT = self._chol_solve(A.T)
            self._schur = self._factor(A @ HiAT, base_jitter=1e-14)
        else:
            self._schur = None

    @staticmethod
    def _factor(H: np.ndarray, base_jitter: float = 0.0):
        scale = max(float(np.trace(H)) / max(H.shape[0], 1), 1e-300)
        jitter = base_jitter * scale
        for _ in range(20):
            try:
                return np.linalg.cholesky(H + jitter * np.eye(H.shape[0]) if jitter else H)
            except np.linalg.LinAlgError:
                jitter = max(jitter * 100.0, 1e-14 * scale)
        raise FloatingPointError("KKT matrix could not be factorized")

    def _chol_solve(self, rhs):
        L = self._chol
        return np.linalg.solve(L.T, np.linalg.solve(L, rhs))

    def _schur_solve(self, rhs):
        L = self._schur
        return np.linalg.solve(L.T, np.linalg.solve(L, rhs))

    def _solve_once(self, bx, by, bz):
        Qbz = self.scaling.WTW_inv(bz)
        rhs1 = bx + self.G.T @ Qbz
        if self._schur is not None:
            Hirhs = self._chol_solve(rhs1)
            uy = self._schur_solve(self.A @ Hirhs - by)
            ux = self._chol_solve(rhs1 - self.A.T @ uy)
        else:
            uy = np.zeros(0)
            ux = self._chol_solve(rhs1)
        uz = self.scaling.WTW_inv(self.G @ ux - bz)
        return ux, uy, uz

    def solve(self, bx, by, bz):
        ux, uy, uz = self._solve_once(bx, by, bz)
        for _ in range(self.refine):
            rx = bx - ((self.A.T @ uy if uy.size else 0.0) + self.G.T @ uz)
            ry = by - self.A @ ux if by.size else np.zeros(0)
            rz = bz - (self.G @ ux - self.scaling.WTW(uz))
            cx, cy, cz = self._solve_once(rx, ry, rz)
            ux = ux + cx
            uy = uy + cy if uy.size else uy
            uz = uz + cz
        return ux, uy, uz


def _compile(program: ConicProgram):
    """Stack the program into conelp data, minimizing the negated objective."""
    n = program.nvars
    Gnn, hnn = program.nonneg_matrix()
    cone = _Cone(Gnn.shape[0], [b.size for b in program.psd_blocks])
    rows = []
    if Gnn.shape[0]:
        rows.append(sp.csc_matrix(-Gnn))
    h = np.zeros(cone.dim)
    h[: cone.n_nonneg] = hnn
    compiled: list[_CompiledPsd] = []
    for blk, off, (I, J, scale) in zip(program.psd_blocks, cone.offsets, cone.maps):
        L = svec_length(blk.size)
        const = np.zeros((blk.size, blk.size))
        coefs: dict[tuple[int, int], dict[int, float]] = {}
        for i, j, var, val in blk.entries:
            if var is None:
                const[i, j] += val
                if i != j:
                    const[j, i] += val
            else:
                per = coefs.setdefault((i, j), {})
                per[var] = per.get(var, 0.0) + val
        data, ri, ci = [], [], []
        per_var: dict[int, list[tuple[int, int, float]]] = {}
        for (i, j), per in coefs.items():
            pos = j * (j + 1) // 2 + i
            sc = 1.0 if i == j else SQRT2
            for var, val in per.items():
                if val == 0.0:
                    continue
                ri.append(pos)
                ci.append(var)
                data.append(-val * sc)
                per_var.setdefault(var, []).append((i, j, val * (0.5 if i == j else 1.0)))
        rows.append(sp.csc_matrix((data, (ri, ci)), shape=(L, n)))
        compiled.append(
            _CompiledPsd(
                blk.size,
                off,
                {
                    v: (
                        np.asarray([e[0] for e in lst]),
                        np.asarray([e[1] for e in lst]),
                        np.asarray([e[2] for e in lst]),
                    )
                    for v, lst in per_var.items()
                },
            )
        )
        h[off : off + L] = svec(const, I, J, scale)
    G = sp.vstack(rows, format="csc") if rows else sp.csc_matrix((0, n))
    A, b = program.eq_matrix()
    c = -program.objective.copy()
    return c, A, b, G, Gnn, h, cone, compiled


def solve(program: ConicProgram, options: SolverOptions | None = None) -> SolverResult:
    """Solve a ConicProgram with the internal interior-point method.

    status semantics:
      optimal            tolerances met; x maximizes the objective
      infeasible         constraints are inconsistent (certificate found)
      unbounded          the objective is unbounded above
      max-iterations     iteration cap hit (or progress stalled); best iterate returned
      numerical-failure  linear algebra broke down before convergence
    """
    opts = options or SolverOptions()
    if opts.equilibrate:
        from .scaling import equilibrate, unscale_result

        scaled, info = equilibrate(program)
        res = _solve_core(scaled, opts)
        return unscale_result(res, info, program)
    return _solve_core(program, opts)


def _solve_core(program: ConicProgram, opts: SolverOptions) -> SolverResult:
    c, A, b, G, Gnn, h, cone, compiled = _compile(program)
    if cone.dim == 0:
        raise ValueError("program has no cone constraints; nothing to solve")

    x = np.zeros(program.nvars)
    y = np.zeros(A.shape[0])
    s = cone.identity()
    z = cone.identity()
    tau, kappa = 1.0, 1.0
    nu = cone.degree + 1

    norm_c = max(1.0, float(np.linalg.norm(c)))
    norm_h = max(1.0, float(np.linalg.norm(h)))
    norm_b = max(1.0, float(np.linalg.norm(b))) if b.size else 1.0

    def dehomogenized(iters: int, status: str, msg: str = "") -> SolverResult:
        xs = x / tau
        pobj = float(-(c @ xs))
        gap = float(s @ z) / tau**2
        pres = float(np.linalg.norm(G @ xs + s / tau - h)) / norm_h
        if b.size:
            pres = max(pres, float(np.linalg.norm(A @ xs - b)) / norm_b)
        dres = float(np.linalg.norm((A.T @ y if y.size else 0.0) + G.T @ z + c * tau)) / tau / norm_c
        zl, zmats = cone.split(z / tau)
        return SolverResult(
            status=status,
            x=xs.copy(),
            objective=pobj,
            gap=gap,
            iterations=iters,
            primal_residual=pres,
            dual_residual=dres,
            dual_psd=zmats,
            dual_nonneg=zl.copy(),
            dual_eq=(y / tau).copy() if y.size else np.zeros(0),
            message=msg,
        )

    best_score = np.inf
    best_state = None
    stall_count = 0

    for it in range(opts.max_iter):
        mu = (float(s @ z) + tau * kappa) / nu

        xs = x / tau
        pobj = float(-(c @ xs))
        gap_abs = float(s @ z) / tau**2
        pres = float(np.linalg.norm(G @ xs + s / tau - h)) / norm_h
        if b.size:
            pres = max(pres, float(np.linalg.norm(A @ xs - b)) / norm_b)
        rx_vec = (A.T @ y if y.size else 0.0) + G.T @ z + c * tau
        dres = float(np.linalg.norm(rx_vec)) / tau / norm_c
        relgap = gap_abs / max(1.0, abs(pobj))
        if opts.verbose:
            print(
                f"iter {it:3d}  mu {mu:9.2e}  pres {pres:9.2e}  dres {dres:9.2e}  "
                f"gap {relgap:9.2e}  tau {tau:8.2e}  kappa {kappa:8.2e}"
            )
        if pres <= opts.feas_tol and dres <= opts.feas_tol and relgap <= opts.gap_tol:
            return dehomogenized(it, "optimal")

        score = max(pres / opts.feas_tol, dres / opts.feas_tol, relgap / opts.gap_tol)
        if score < 0.99 * best_score:
            best_score = score
            best_state = (x.copy(), y.copy(), z.copy(), s.copy(), tau, kappa, it)
            stall_count = 0
        else:
            stall_count += 1
        if stall_count >= 8:
            x, y, z, s, tau, kappa, it_best = best_state
            return dehomogenized(it, "max-iterations", f"progress stalled (best iterate from iteration {it_best})")

        # certificates: scaled rays of the embedding
        hz_by = float(h @ z + (b @ y if y.size else 0.0))
        if hz_by < 0:
            cert = float(np.linalg.norm((A.T @ y if y.size else 0.0) + G.T @ z)) / (-hz_by) / norm_c
            if cert <= opts.feas_tol:
                return SolverResult("infeasible", None, None, gap_abs, it, pres, dres,
                                    message="primal infeasibility certificate")
        cx = float(c @ x)
        if cx < 0:
            ray = float(np.linalg.norm(G @ x + s)) / norm_h
            if b.size:
                ray = max(ray, float(np.linalg.norm(A @ x)) / norm_b)
            if ray / (-cx) <= opts.feas_tol:
                return SolverResult("unbounded", None, None, gap_abs, it, pres, dres,
                                    message="dual infeasibility certificate")
        if tau <= 1e-12 * max(1.0, kappa):
            return SolverResult("numerical-failure", None, None, gap_abs, it, pres, dres,
                                message="tau collapsed without a clean certificate")

        rx = rx_vec
        ry = A @ x - b * tau if b.size else np.zeros(0)
        rz = G @ x + s - h * tau
        rt = kappa + float(c @ x) + float(b @ y if y.size else 0.0) + float(h @ z)

        try:
            scaling = _Scaling(cone, s, z)
            kkt = _KKT(G, Gnn, compiled, A, scaling, cone, opts.refine)
            x1, y1, z1 = kkt.solve(-c, b, h)
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            return dehomogenized(it, "numerical-failure", f"scaling/KKT failure: {exc}")

        lam = scaling.lam_vector()
        lam_sq = scaling.jordan_product(lam, lam)
        # stable form of kappa/tau - (c.x1 + b.y1 + h.z1): the static solve
        # satisfies c.x1 + b.y1 + h.z1 = -|W z1|^2 exactly, and the direct
        # difference cancels catastrophically near convergence
        Wz1 = scaling.W(z1)
        denom = kappa / tau + float(Wz1 @ Wz1)

        def direction(ds_target: np.ndarray, dtau_target: float):
            wds = scaling.WT(scaling.lam_solve(ds_target))
            x2, y2, z2 = kkt.solve(-rx, -ry, -rz - wds)
            if denom < 1e-300 or not np.isfinite(denom):
                raise FloatingPointError("singular tau elimination")
            dtau = (dtau_target / tau + rt + float(c @ x2 + (b @ y2 if y2.size else 0.0) + h @ z2)) / denom
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1 if y1.size else y2
            dz = z2 + dtau * z1
            dsv = -rz + h * dtau - G @ dx
            dkap = -rt - float(c @ dx + (b @ dy if dy.size else 0.0) + h @ dz)
            return dx, dy, dz, dsv, dtau, dkap

        def boundary(dsv, dz, dtau, dkap):
            rho = scaling.Winv_T(dsv)
            sig = scaling.W(dz)
            alpha = min(scaling.max_step(rho), scaling.max_step(sig))
            if dtau < 0:
                alpha = min(alpha, tau / -dtau)
            if dkap < 0:
                alpha = min(alpha, kappa / -dkap)
            return alpha, rho, sig

        try:
            dx_a, dy_a, dz_a, dsv_a, dtau_a, dkap_a = direction(-lam_sq, -tau * kappa)
            amax_a, rho_a, sig_a = boundary(dsv_a, dz_a, dtau_a, dkap_a)
            alpha_a = min(1.0, opts.step_frac * amax_a)
            mu_aff = (
                float((s + alpha_a * dsv_a) @ (z + alpha_a * dz_a))
                + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)
            ) / nu
            # floor on the centering weight keeps the complementarity products
            # from unbalancing on degenerate (non-strictly-complementary) optima
            sigma = min(1.0, max(1e-2, (mu_aff / mu) ** 3))

            corr = scaling.jordan_product(rho_a, sig_a)
            ds_comb = sigma * mu * cone.identity() - lam_sq - corr
            dtau_comb = sigma * mu - tau * kappa - dtau_a * dkap_a
            dx, dy, dz, dsv, dtau, dkap = direction(ds_comb, dtau_comb)
            amax, _, _ = boundary(dsv, dz, dtau, dkap)
            if amax < 0.01:
                # progress blocked: fall back to a pure recentering step
                ds_center = 0.8 * mu * cone.identity() - lam_sq
                dx, dy, dz, dsv, dtau, dkap = direction(ds_center, 0.8 * mu - tau * kappa)
                amax, _, _ = boundary(dsv, dz, dtau, dkap)
            alpha = min(1.0, opts.step_frac * amax)
        except (np.linalg.LinAlgError, FloatingPointError) as exc:
            return dehomogenized(it, "numerical-failure", f"direction failure: {exc}")

        if alpha <= 1e-13 or not np.isfinite(alpha):
            if best_state is not None:
                x, y, z, s, tau, kappa, it_best = best_state
                return dehomogenized(it, "max-iterations", f"step size collapsed (best iterate from iteration {it_best})")
            return dehomogenized(it, "numerical-failure", "step size collapsed")

        x = x + alpha * dx
        if y.size:
            y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * dsv
        tau += alpha * dtau
        kappa += alpha * dkap
        if not (0.1 <= tau <= 10.0) and kappa / tau <= 1e3:
            # the embedding is homogeneous: renormalize so tau = 1 to keep
            # the de-homogenized gap s.z / tau^2 within numerical reach
            theta = 1.0 / tau
            x *= theta
            if y.size:
                y *= theta
            z *= theta
            s *= theta
            kappa *= theta
            tau = 1.0
        if kappa < 1e-280 or tau < 1e-280:
            break

    if best_state is not None:
        x, y, z, s, tau, kappa, it_best = best_state
        return dehomogenized(opts.max_iter, "max-iterations", f"iteration limit reached (best iterate from iteration {it_best})")
    return dehomogenized(opts.max_iter, "max-iterations", "iteration limit reached")
