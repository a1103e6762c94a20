"""Sparse ASCII exchange format for conic programs and their solutions.

This is the adapter boundary for plugging in an external conic solver; the
layout is line-oriented, whitespace-separated, and stable across releases.

Problem file::

    conic <nvars> <neq> <npsd> <nnonneg>
    obj <col> <val>                    # sparse objective, maximized
    eq <row> <col> <val>               # equality LHS triplets
    rhs <row> <val>                    # equality right-hand sides
    psd <block> <size>                 # PSD block declaration
    entry <block> <i> <j> <var|const> <val>
    nn <row> <var|const> <val>         # nonnegative-orthant row terms

``entry`` rows add ``val`` symmetrically at (i, j) and (j, i) of the
coefficient matrix of variable ``var`` (0-based), or of the constant
matrix when the field is the literal token ``const``.  Indices are
0-based everywhere.  Floats are written in round-trip repr form.

Solution file::

    solution <status>
    objective <val>
    gap <val>
    iterations <n>
    x <col> <val>                      # sparse primal solution

Zero entries of x may be omitted.
"""

from __future__ import annotations

from .program import ConicProgram, SolverResult


class FormatError(ValueError):
    """Malformed problem or solution text."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def serialize_program(p: ConicProgram) -> str:
    A, b = p.eq_matrix()
    G, h = p.nonneg_matrix()
    out = [f"conic {p.nvars} {p.n_eq} {len(p.psd_blocks)} {p.n_nonneg}"]
    for j, v in enumerate(p.objective):
        if v != 0.0:
            out.append(f"obj {j} {float(v)!r}")
    for r in range(A.shape[0]):
        for j in range(p.nvars):
            if A[r, j] != 0.0:
                out.append(f"eq {r} {j} {float(A[r, j])!r}")
    for r in range(A.shape[0]):
        out.append(f"rhs {r} {float(b[r])!r}")
    for k, blk in enumerate(p.psd_blocks):
        out.append(f"psd {k} {blk.size}")
        for i, j, var, val in blk.entries:
            tag = "const" if var is None else str(var)
            out.append(f"entry {k} {i} {j} {tag} {float(val)!r}")
    for r in range(G.shape[0]):
        for j in range(p.nvars):
            if G[r, j] != 0.0:
                out.append(f"nn {r} {j} {float(G[r, j])!r}")
        if h[r] != 0.0 or not G[r].any():
            out.append(f"nn {r} const {float(h[r])!r}")
    return "\n".join(out) + "\n"


def _parse_float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise FormatError(lineno, f"bad float {tok!r}") from None


def _parse_int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(lineno, f"bad integer {tok!r}") from None


def parse_program(text: str) -> ConicProgram:
    lines = text.splitlines()
    header = None
    for lineno, raw in enumerate(lines, 1):
        toks = raw.split()
        if not toks or toks[0].startswith("#"):
            continue
        if toks[0] != "conic":
            raise FormatError(lineno, f"expected 'conic' header, got {toks[0]!r}")
        if len(toks) != 5:
            raise FormatError(lineno, "header needs: conic nvars neq npsd nnonneg")
        header = (lineno, [_parse_int(t, lineno) for t in toks[1:]])
        break
    if header is None:
        raise FormatError(1, "empty problem file")
    start, (nvars, neq, npsd, nnonneg) = header
    prog = ConicProgram(nvars)
    eq_coeffs: list[dict[int, float]] = [dict() for _ in range(neq)]
    eq_rhs = [0.0] * neq
    nn_coeffs: list[dict[int, float]] = [dict() for _ in range(nnonneg)]
    nn_const = [0.0] * nnonneg
    psd_sizes: dict[int, int] = {}
    psd_entries: dict[int, list] = {}

    def check_range(val: int, n: int, what: str, lineno: int) -> int:
        if not 0 <= val < n:
            raise FormatError(lineno, f"{what} {val} out of range [0, {n})")
        return val

    for lineno, raw in enumerate(lines[start:], start + 1):
        toks = raw.split()
        if not toks or toks[0].startswith("#"):
            continue
        kind = toks[0]
        if kind == "obj" and len(toks) == 3:
            j = check_range(_parse_int(toks[1], lineno), nvars, "variable", lineno)
            prog.objective[j] = _parse_float(toks[2], lineno)
        elif kind == "eq" and len(toks) == 4:
            r = check_range(_parse_int(toks[1], lineno), neq, "equality row", lineno)
            j = check_range(_parse_int(toks[2], lineno), nvars, "variable", lineno)
            eq_coeffs[r][j] = eq_coeffs[r].get(j, 0.0) + _parse_float(toks[3], lineno)
        elif kind == "rhs" and len(toks) == 3:
            r = check_range(_parse_int(toks[1], lineno), neq, "equality row", lineno)
            eq_rhs[r] = _parse_float(toks[2], lineno)
        elif kind == "psd" and len(toks) == 3:
            k = check_range(_parse_int(toks[1], lineno), npsd, "psd block", lineno)
            size = _parse_int(toks[2], lineno)
            if size < 1:
                raise FormatError(lineno, "psd block size must be >= 1")
            psd_sizes[k] = size
            psd_entries.setdefault(k, [])
        elif kind == "entry" and len(toks) == 6:
            k = check_range(_parse_int(toks[1], lineno), npsd, "psd block", lineno)
            if k not in psd_sizes:
                raise FormatError(lineno, f"entry before psd declaration of block {k}")
            i = check_range(_parse_int(toks[2], lineno), psd_sizes[k], "row", lineno)
            j = check_range(_parse_int(toks[3], lineno), psd_sizes[k], "col", lineno)
            var = None if toks[4] == "const" else check_range(_parse_int(toks[4], lineno), nvars, "variable", lineno)
            psd_entries[k].append((i, j, var, _parse_float(toks[5], lineno)))
        elif kind == "nn" and len(toks) == 4:
            r = check_range(_parse_int(toks[1], lineno), nnonneg, "nonneg row", lineno)
            if toks[2] == "const":
                nn_const[r] += _parse_float(toks[3], lineno)
            else:
                j = check_range(_parse_int(toks[2], lineno), nvars, "variable", lineno)
                nn_coeffs[r][j] = nn_coeffs[r].get(j, 0.0) + _parse_float(toks[3], lineno)
        else:
            raise FormatError(lineno, f"unrecognized record {raw.strip()!r}")

    if len(psd_sizes) != npsd:
        missing = sorted(set(range(npsd)) - set(psd_sizes))
        raise FormatError(len(lines), f"psd blocks never declared: {missing}")
    for r, (coeffs, rhs) in enumerate(zip(eq_coeffs, eq_rhs)):
        prog.add_equality(coeffs, rhs)
    for k in range(npsd):
        blk = prog.add_psd_block(psd_sizes[k])
        for i, j, var, val in psd_entries[k]:
            blk.add(i, j, var, val)
    for coeffs, const in zip(nn_coeffs, nn_const):
        prog.add_nonneg(coeffs, const)
    return prog


def serialize_solution(result: SolverResult, nvars: int) -> str:
    out = [f"solution {result.status}"]
    if result.objective is not None:
        out.append(f"objective {float(result.objective)!r}")
    out.append(f"gap {float(result.gap)!r}")
    out.append(f"iterations {result.iterations}")
    if result.x is not None:
        for j in range(nvars):
            if result.x[j] != 0.0:
                out.append(f"x {j} {float(result.x[j])!r}")
    return "\n".join(out) + "\n"


def parse_solution(text: str, nvars: int) -> SolverResult:
    import numpy as np

    status = None
    objective = None
    gap = float("nan")
    iterations = 0
    x = np.zeros(nvars)
    seen_x = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        toks = raw.split()
        if not toks or toks[0].startswith("#"):
            continue
        kind = toks[0]
        if kind == "solution" and len(toks) == 2:
            status = toks[1]
        elif kind == "objective" and len(toks) == 2:
            objective = _parse_float(toks[1], lineno)
        elif kind == "gap" and len(toks) == 2:
            gap = _parse_float(toks[1], lineno)
        elif kind == "iterations" and len(toks) == 2:
            iterations = _parse_int(toks[1], lineno)
        elif kind == "x" and len(toks) == 3:
            j = _parse_int(toks[1], lineno)
            if not 0 <= j < nvars:
                raise FormatError(lineno, f"variable {j} out of range [0, {nvars})")
            x[j] = _parse_float(toks[2], lineno)
            seen_x = True
        else:
            raise FormatError(lineno, f"unrecognized record {raw.strip()!r}")
    if status is None:
        raise FormatError(1, "missing 'solution' status line")
    return SolverResult(
        status=status,
        x=x if (seen_x or status == "optimal") else None,
        objective=objective,
        gap=gap,
        iterations=iterations,
    )
