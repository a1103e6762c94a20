"""Multi-index and sparse polynomial algebra over monomial bases.

Everything downstream (moment matrices, localizing matrices, model
parameterizations) is indexed by exponent vectors alpha = (a_1,...,a_n)
standing for the monomial x^alpha = x_1^a_1 * ... * x_n^a_n.  The canonical
basis of all monomials with |alpha| <= d is ordered graded-lexicographically:
by total degree first, then lexicographically with x_1 heaviest, so for
n=2, d=2 the order is 1, x1, x2, x1^2, x1*x2, x2^2.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

MultiIndex = tuple[int, ...]


def degree_of(alpha: MultiIndex) -> int:
    return sum(alpha)


def add_indices(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    """Componentwise sum of two exponent vectors of equal arity."""
    if len(a) != len(b):
        raise ValueError(f"arity mismatch: {len(a)} vs {len(b)}")
    return tuple(x + y for x, y in zip(a, b))


def _exponents_of_degree(n: int, deg: int) -> Iterator[tuple[int, ...]]:
    # lex-descending within a fixed total degree: leading exponent largest
    if n == 1:
        yield (deg,)
        return
    for first in range(deg, -1, -1):
        for rest in _exponents_of_degree(n - 1, deg - first):
            yield (first,) + rest


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of degree <= max_degree in n variables, graded-lex ordered.

    size == C(n + d, n); ``index_of`` inverts positional lookup.
    """

    arity: int
    max_degree: int
    exponents: tuple[MultiIndex, ...]
    _index: dict[MultiIndex, int] = field(repr=False, hash=False, compare=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.exponents)

    def __getitem__(self, i: int) -> MultiIndex:
        return self.exponents[i]

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.exponents)

    def index_of(self, alpha: MultiIndex) -> int:
        try:
            return self._index[tuple(alpha)]
        except KeyError:
            raise KeyError(f"monomial {alpha} not in basis (n={self.arity}, d={self.max_degree})") from None

    def __contains__(self, alpha: MultiIndex) -> bool:
        return tuple(alpha) in self._index


@lru_cache(maxsize=None)
def generate_basis(n: int, d: int) -> MonomialBasis:
    """Graded-lex basis of the C(n+d, n) monomials of degree <= d in n factors."""
    if n < 1:
        raise ValueError("arity must be >= 1")
    if d < 0:
        raise ValueError("degree must be >= 0")
    exps: list[MultiIndex] = []
    for deg in range(d + 1):
        exps.extend(_exponents_of_degree(n, deg))
    assert len(exps) == math.comb(n + d, n)
    basis = MonomialBasis(n, d, tuple(exps))
    basis._index.update({a: i for i, a in enumerate(exps)})
    return basis


class Polynomial:
    """Sparse real polynomial: a map from exponent vectors to coefficients.

    Zero coefficients are never stored; the zero polynomial has an empty
    term map and degree 0.  Instances are immutable.
    """

    __slots__ = ("arity", "terms")

    def __init__(self, arity: int, terms: dict[MultiIndex, float] | None = None):
        if arity < 1:
            raise ValueError("arity must be >= 1")
        clean: dict[MultiIndex, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(e) for e in alpha)
            if len(alpha) != arity:
                raise ValueError(f"term {alpha} has arity {len(alpha)}, expected {arity}")
            if any(e < 0 for e in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
                if clean[alpha] == 0.0:
                    del clean[alpha]
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @property
    def degree(self) -> int:
        return max((degree_of(a) for a in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(degree_of(a) == 0 for a in self.terms)

    def evaluate(self, x) -> float:
        """Evaluate at a point, sum_alpha c_alpha * prod_i x_i^alpha_i."""
        if len(x) != self.arity:
            raise ValueError(f"point has arity {len(x)}, expected {self.arity}")
        total = 0.0
        for alpha, c in self.terms.items():
            v = c
            for xi, e in zip(x, alpha):
                if e:
                    v *= float(xi) ** e
            total += v
        return total

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.arity != other.arity:
            raise ValueError("arity mismatch")
        merged = dict(self.terms)
        for a, c in other.terms.items():
            merged[a] = merged.get(a, 0.0) + c
        return Polynomial(self.arity, merged)

    def __mul__(self, scalar: float) -> "Polynomial":
        return Polynomial(self.arity, {a: c * scalar for a, c in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "Polynomial":
        return self * -1.0

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.arity == other.arity and self.terms == other.terms

    def __hash__(self):
        return hash((self.arity, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"Polynomial({self.arity}, {format_polynomial(self)!r})"


_TERM_SPLIT = re.compile(r"(?<![eE])([+-])")
_FACTOR = re.compile(r"^(?:(?P<coef>[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?)|x(?P<var>[0-9]+)(?:\^(?P<pow>[0-9]+))?)$")


def parse_polynomial(text: str, arity: int) -> Polynomial:
    """Parse strings like ``3.5*x1^2*x3 - x2 + 1`` into a Polynomial.

    Variables are named x1..xn, ``^`` denotes powers, ``*`` separates factors
    and the coefficient; whitespace is ignored.  Raises ValueError on any
    token it does not understand or on variables beyond the declared arity.
    """
    compact = text.replace(" ", "").replace("\t", "")
    if not compact:
        raise ValueError("empty polynomial string")
    pieces = _TERM_SPLIT.split(compact)
    # pieces alternates: [lead, sign, term, sign, term, ...]; lead may be empty
    chunks: list[tuple[int, str]] = []
    sign = 1
    if pieces[0]:
        chunks.append((1, pieces[0]))
    for i in range(1, len(pieces), 2):
        sign = -1 if pieces[i] == "-" else 1
        if i + 1 >= len(pieces) or not pieces[i + 1]:
            raise ValueError(f"dangling sign in polynomial {text!r}")
        chunks.append((sign, pieces[i + 1]))
    terms: dict[MultiIndex, float] = {}
    for sgn, chunk in chunks:
        coef = float(sgn)
        exps = [0] * arity
        for factor in chunk.split("*"):
            m = _FACTOR.match(factor)
            if m is None:
                raise ValueError(f"cannot parse factor {factor!r} in polynomial {text!r}")
            if m.group("coef") is not None:
                coef *= float(m.group("coef"))
            else:
                var = int(m.group("var"))
                if not 1 <= var <= arity:
                    raise ValueError(f"variable x{var} out of range for arity {arity} in {text!r}")
                exps[var - 1] += int(m.group("pow") or 1)
        alpha = tuple(exps)
        terms[alpha] = terms.get(alpha, 0.0) + coef
    return Polynomial(arity, terms)


def substitute_affine(p: Polynomial, offsets, scales) -> Polynomial:
    """Composition with the substitution x_i = offsets_i + scales_i * u_i.

    Expands binomially per factor; exact for the small degrees used here.
    """
    if len(offsets) != p.arity or len(scales) != p.arity:
        raise ValueError("offset/scale arity mismatch")
    terms: dict[MultiIndex, float] = {}
    for alpha, c in p.terms.items():
        # per-variable expansion of (a_i + s_i u_i)^{e}: coefficient of u^k
        per_var: list[list[float]] = []
        for a_i, s_i, e in zip(offsets, scales, alpha):
            per_var.append([math.comb(e, k) * (a_i ** (e - k)) * (s_i**k) for k in range(e + 1)])
        # cross product of the expansions
        stack: list[tuple[tuple[int, ...], float]] = [((), c)]
        for coeffs in per_var:
            stack = [
                (exp + (k,), val * ck)
                for exp, val in stack
                for k, ck in enumerate(coeffs)
                if ck != 0.0
            ]
        for exp, val in stack:
            terms[exp] = terms.get(exp, 0.0) + val
    return Polynomial(p.arity, terms)


def format_monomial(alpha: MultiIndex) -> str:
    factors = [f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(alpha) if e > 0]
    return "*".join(factors) if factors else "1"


def format_polynomial(p: Polynomial) -> str:
    if p.is_zero():
        return "0"
    basis_order = sorted(p.terms, key=lambda a: (degree_of(a), tuple(-e for e in a)))
    out = []
    for alpha, in_first in zip(basis_order, [True] + [False] * len(basis_order)):
        c = p.terms[alpha]
        mono = format_monomial(alpha)
        mag = abs(c)
        if mono == "1":
            body = repr(mag)
        elif mag == 1.0:
            body = mono
        else:
            body = f"{mag!r}*{mono}"
        if in_first:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append(("- " if c < 0 else "+ ") + body)
    return " ".join(out)
