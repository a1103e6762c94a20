"""Ruiz-style equilibration of conic programs.

Moment-relaxation data mixes entry magnitudes across many orders (moments
of measures on boxes like [0,4] reach 4^degree), which wrecks the
conditioning of the interior-point normal equations.  Equilibration
rescales decision variables (column scaling d), applies a diagonal
congruence E S E to every PSD block, and scales nonneg/equality rows,
iterating a few rounds of 1/sqrt(max) updates.  The transform is exact:
solutions and dual variables map back by diagonal factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .program import ConicProgram, SolverResult


@dataclass
class ScalingInfo:
    col: np.ndarray  # x = col * x_scaled
    block_diag: list[np.ndarray]  # congruence E_k per PSD block
    nn_rows: np.ndarray
    eq_rows: np.ndarray
    obj_scale: float


def _safe_inv_sqrt(v: np.ndarray) -> np.ndarray:
    out = np.ones_like(v)
    mask = v > 0
    out[mask] = 1.0 / np.sqrt(v[mask])
    return np.clip(out, 1e-8, 1e8)


def equilibrate(p: ConicProgram, rounds: int = 3) -> tuple[ConicProgram, ScalingInfo]:
    n = p.nvars
    A, b = p.eq_matrix()
    G, h = p.nonneg_matrix()
    col = np.ones(n)
    eq_rows = np.ones(A.shape[0])
    nn_rows = np.ones(G.shape[0])
    block_diag = [np.ones(blk.size) for blk in p.psd_blocks]

    for _ in range(rounds):
        # row pass: per-PSD-block diagonal congruence, per-row for nn/eq
        for k, blk in enumerate(p.psd_blocks):
            E = block_diag[k]
            row_max = np.zeros(blk.size)
            for i, j, var, val in blk.entries:
                scaled = abs(val) * E[i] * E[j] * (col[var] if var is not None else 1.0)
                row_max[i] = max(row_max[i], scaled)
                row_max[j] = max(row_max[j], scaled)
            block_diag[k] = E * _safe_inv_sqrt(row_max)
        if G.shape[0]:
            scaledG = np.abs(G) * col[None, :] * nn_rows[:, None]
            row_max = np.maximum(scaledG.max(axis=1), np.abs(h) * nn_rows)
            nn_rows *= _safe_inv_sqrt(row_max)
        if A.shape[0]:
            scaledA = np.abs(A) * col[None, :] * eq_rows[:, None]
            row_max = np.maximum(scaledA.max(axis=1), np.abs(b) * eq_rows)
            eq_rows *= _safe_inv_sqrt(row_max)
        # column pass
        col_max = np.zeros(n)
        for k, blk in enumerate(p.psd_blocks):
            E = block_diag[k]
            for i, j, var, val in blk.entries:
                if var is not None:
                    col_max[var] = max(col_max[var], abs(val) * E[i] * E[j] * col[var])
        if G.shape[0]:
            col_max = np.maximum(col_max, (np.abs(G) * nn_rows[:, None] * col[None, :]).max(axis=0))
        if A.shape[0]:
            col_max = np.maximum(col_max, (np.abs(A) * eq_rows[:, None] * col[None, :]).max(axis=0))
        col *= _safe_inv_sqrt(col_max)

    cs = np.abs(p.objective) * col
    obj_scale = 1.0 / max(float(cs.max()), 1e-12) if cs.size else 1.0

    q = ConicProgram(n)
    q.set_objective(p.objective * col * obj_scale)
    for r in range(A.shape[0]):
        q.add_equality({j: A[r, j] * col[j] * eq_rows[r] for j in range(n) if A[r, j] != 0.0}, b[r] * eq_rows[r])
    for k, blk in enumerate(p.psd_blocks):
        E = block_diag[k]
        out = q.add_psd_block(blk.size)
        for i, j, var, val in blk.entries:
            f = E[i] * E[j] * (col[var] if var is not None else 1.0)
            out.entries.append((i, j, var, val * f))
    for r in range(G.shape[0]):
        q.add_nonneg({j: G[r, j] * col[j] * nn_rows[r] for j in range(n) if G[r, j] != 0.0}, h[r] * nn_rows[r])
    return q, ScalingInfo(col, block_diag, nn_rows, eq_rows, obj_scale)


def unscale_result(res: SolverResult, info: ScalingInfo, original: ConicProgram) -> SolverResult:
    if res.x is None:
        return res
    x = res.x * info.col
    objective = float(original.objective @ x)
    dual_psd = None
    if res.dual_psd is not None:
        dual_psd = [
            (E[:, None] * Z * E[None, :]) / info.obj_scale
            for Z, E in zip(res.dual_psd, info.block_diag)
        ]
    dual_nonneg = None
    if res.dual_nonneg is not None:
        dual_nonneg = res.dual_nonneg * info.nn_rows / info.obj_scale
    dual_eq = None
    if res.dual_eq is not None:
        dual_eq = res.dual_eq * info.eq_rows / info.obj_scale
    return SolverResult(
        status=res.status,
        x=x,
        objective=objective,
        gap=res.gap / info.obj_scale,
        iterations=res.iterations,
        primal_residual=res.primal_residual,
        dual_residual=res.dual_residual,
        dual_psd=dual_psd,
        dual_nonneg=dual_nonneg,
        dual_eq=dual_eq,
        message=res.message,
    )
