"""The problem-file format: a line-oriented description of a discrimination design problem.

Example::

    schema 1
    n 2
    d 2
    constraint 4*x1 - x1^2
    constraint 1 - x2^2
    model eta1
      term 1     range: [0, 4]
      term x1    range: [0, 4]
      term x2    range: [0, 4]
      term x1^2  range: [0, 4]
    model eta2
      term 1     range: [0, 2]
      term x1    range: [0, 2]
      term x2    range: [0, 2]
      term x1^2  range: [0, 2]
      term x1*x2 range: [1, 4]
      term x2^2  range: [1, 4]
    mode minmax
    option tau_max 3

Monomials absent from a model block are fixed at 0.  ``mode weighted``
requires ``weight <model_j> <model_k> <w>`` lines.  Options mirror the
run settings (tau_max, r_max, stall_tol, gap_tol, feas_tol, max_iter,
grid, seed, solver).  Lines starting with ``#`` are comments; indentation
is not significant.  Unknown fields are rejected with the line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discrim import ModelSpec, ParameterBox
from .polynomials import MultiIndex, format_monomial, format_polynomial, generate_basis, parse_polynomial
from .relax import DiscriminationProblem, RunOptions


class ProblemFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


_OPTION_FIELDS = {
    "tau_max": int,
    "r_max": int,
    "stall_tol": float,
    "gap_tol": float,
    "feas_tol": float,
    "max_iter": int,
    "grid": int,
    "seed": int,
    "solver": str,
    "extraction_solver": str,
}


@dataclass
class ProblemFile:
    """Parsed problem file, 1:1 with the text representation."""

    schema: int
    n: int
    d: int
    constraints: list[str]
    models: list[tuple[str, dict[MultiIndex, tuple[str, float, float]]]]
    mode: str = "minmax"
    weights: list[tuple[str, str, float]] = field(default_factory=list)
    options: dict[str, object] = field(default_factory=dict)

    def to_problem(self) -> DiscriminationProblem:
        basis = generate_basis(self.n, self.d)
        models = []
        for label, terms in self.models:
            lo = np.zeros(len(basis))
            hi = np.zeros(len(basis))
            for alpha, (kind, a, b) in terms.items():
                idx = basis.index_of(alpha)
                lo[idx], hi[idx] = a, b
            models.append(ModelSpec(label, ParameterBox(lo, hi)))
        labels = {m.label: i + 1 for i, m in enumerate(models)}
        weights = {}
        if self.mode == "weighted":  # weight lines are inert in min-mode
            for lj, lk, w in self.weights:
                j, k = labels[lj], labels[lk]
                if j < k:
                    j, k = k, j
                weights[(j, k)] = weights.get((j, k), 0.0) + w
        opts = RunOptions()
        for key, val in self.options.items():
            attr = "grid_density" if key == "grid" else key
            setattr(opts, attr, val)
        constraints = [parse_polynomial(c, self.n) for c in self.constraints]
        return DiscriminationProblem(
            self.n, self.d, constraints, models,
            mode=self.mode, weights=weights, options=opts,
        )


def parse_problem(text: str) -> ProblemFile:
    schema = None
    n = None
    d = None
    constraints: list[str] = []
    models: list[tuple[str, dict]] = []
    mode = None
    weights: list[tuple[str, str, float]] = []
    options: dict[str, object] = {}
    current_model: dict | None = None

    def fail(lineno, msg):
        raise ProblemFormatError(lineno, msg)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split(None, 1)
        key = toks[0]
        rest = toks[1] if len(toks) > 1 else ""
        if key == "schema":
            if schema is not None:
                fail(lineno, "duplicate schema")
            try:
                schema = int(rest)
            except ValueError:
                fail(lineno, f"bad schema version {rest!r}")
            if schema != 1:
                fail(lineno, f"unsupported schema version {schema}")
        elif key == "n":
            try:
                n = int(rest)
            except ValueError:
                fail(lineno, f"bad factor count {rest!r}")
            if n < 1:
                fail(lineno, "n must be >= 1")
        elif key == "d":
            try:
                d = int(rest)
            except ValueError:
                fail(lineno, f"bad degree {rest!r}")
            if d < 1:
                fail(lineno, "d must be >= 1")
        elif key == "constraint":
            if not rest:
                fail(lineno, "constraint needs a polynomial")
            constraints.append(rest.strip())
            current_model = None
        elif key == "model":
            label = rest.strip()
            if not label:
                fail(lineno, "model needs a label")
            if any(lbl == label for lbl, _ in models):
                fail(lineno, f"duplicate model label {label!r}")
            current_model = {}
            models.append((label, current_model))
        elif key == "term":
            if current_model is None:
                fail(lineno, "term outside a model block")
            if n is None or d is None:
                fail(lineno, "term before n and d are declared")
            parts = rest.split(None, 1)
            if len(parts) != 2:
                fail(lineno, "term needs: term <monomial> fixed: v | range: [lo, hi]")
            mono_text, spec = parts
            try:
                poly = parse_polynomial(mono_text, n)
            except ValueError as exc:
                fail(lineno, str(exc))
            if len(poly.terms) != 1 or abs(next(iter(poly.terms.values())) - 1.0) > 0:
                fail(lineno, f"term {mono_text!r} must be a plain monomial")
            alpha = next(iter(poly.terms.keys()))
            if sum(alpha) > d:
                fail(lineno, f"term {mono_text!r} exceeds the declared degree {d}")
            if alpha in current_model:
                fail(lineno, f"duplicate term {mono_text!r}")
            spec = spec.strip()
            if spec.startswith("fixed:"):
                try:
                    v = float(spec[len("fixed:"):].strip())
                except ValueError:
                    fail(lineno, f"bad fixed value in {spec!r}")
                current_model[alpha] = ("fixed", v, v)
            elif spec.startswith("range:"):
                body = spec[len("range:"):].strip()
                if not (body.startswith("[") and body.endswith("]")):
                    fail(lineno, "range needs [lo, hi]")
                try:
                    lo_s, hi_s = body[1:-1].split(",")
                    lo, hi = float(lo_s), float(hi_s)
                except ValueError:
                    fail(lineno, f"bad range {body!r}")
                if lo > hi:
                    fail(lineno, "range lower bound exceeds upper bound")
                current_model[alpha] = ("range", lo, hi)
            else:
                fail(lineno, f"term needs 'fixed: v' or 'range: [lo, hi]', got {spec!r}")
        elif key == "mode":
            if mode is not None:
                fail(lineno, "duplicate mode")
            if rest not in ("minmax", "weighted"):
                fail(lineno, f"mode must be minmax or weighted, got {rest!r}")
            mode = rest
            current_model = None
        elif key == "weight":
            parts = rest.split()
            if len(parts) != 3:
                fail(lineno, "weight needs: weight <model_j> <model_k> <value>")
            lj, lk, w_s = parts
            try:
                w = float(w_s)
            except ValueError:
                fail(lineno, f"bad weight {w_s!r}")
            if w < 0:
                fail(lineno, "pair weights must be nonnegative")
            weights.append((lj, lk, w))
            current_model = None
        elif key == "option":
            parts = rest.split(None, 1)
            if len(parts) != 2:
                fail(lineno, "option needs: option <name> <value>")
            name, val_s = parts
            if name not in _OPTION_FIELDS:
                fail(lineno, f"unknown option {name!r} (known: {', '.join(sorted(_OPTION_FIELDS))})")
            caster = _OPTION_FIELDS[name]
            try:
                val = caster(val_s.strip())
            except ValueError:
                fail(lineno, f"bad value {val_s!r} for option {name}")
            options[name] = val
            current_model = None
        else:
            fail(lineno, f"unknown field {key!r}")

    last = len(text.splitlines())
    if schema is None:
        raise ProblemFormatError(last or 1, "missing schema line")
    if n is None or d is None:
        raise ProblemFormatError(last or 1, "missing n or d")
    if len(models) < 2:
        raise ProblemFormatError(last or 1, "need at least two model blocks")
    if mode is None:
        mode = "minmax"
    if mode == "weighted" and not weights:
        raise ProblemFormatError(last or 1, "weighted mode needs weight lines")
    labels = {lbl for lbl, _ in models}
    for lj, lk, _ in weights:
        for lbl in (lj, lk):
            if lbl not in labels:
                raise ProblemFormatError(last or 1, f"weight refers to unknown model {lbl!r}")
        if lj == lk:
            raise ProblemFormatError(last or 1, "weight needs two distinct models")
    return ProblemFile(schema, n, d, constraints, models, mode, weights, options)


def serialize_problem(pf: ProblemFile) -> str:
    """Canonical text form; parse(serialize(parse(t))) is identical to parse(t)."""
    out = [f"schema {pf.schema}", f"n {pf.n}", f"d {pf.d}"]
    for c in pf.constraints:
        out.append(f"constraint {format_polynomial(parse_polynomial(c, pf.n))}")
    basis = generate_basis(pf.n, pf.d)
    for label, terms in pf.models:
        out.append(f"model {label}")
        for alpha in basis:
            if alpha not in terms:
                continue
            kind, lo, hi = terms[alpha]
            mono = format_monomial(alpha)
            if kind == "fixed":
                out.append(f"  term {mono} fixed: {lo!r}")
            else:
                out.append(f"  term {mono} range: [{lo!r}, {hi!r}]")
    out.append(f"mode {pf.mode}")
    for lj, lk, w in pf.weights:
        out.append(f"weight {lj} {lk} {w!r}")
    for name in sorted(pf.options):
        out.append(f"option {name} {pf.options[name]}")
    return "\n".join(out) + "\n"


def load_problem(text: str) -> tuple[DiscriminationProblem, ProblemFile]:
    pf = parse_problem(text)
    return pf.to_problem(), pf
