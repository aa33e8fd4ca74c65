"""Exact polynomials in z, h_1..h_r with coefficients in Z^D.

A monomial is the pair ``(z_exp, h_exps)``.  A :class:`VectorPolynomial` maps
monomials to nonzero integer vectors and is immutable and hashable, so that
families can be deduplicated by plain equality.  The h-variables are
positional; operations that introduce a new shift variable append it last.
"""

from __future__ import annotations

import functools
import math
import re
from typing import Iterable, Iterator, Mapping, Sequence

from .lattice import Vec, checked, is_zero, unit, vadd, vec, vneg, vscale, vsub, zero

Monomial = tuple[int, tuple[int, ...]]


@functools.total_ordering
class _MinusInfinity:
    """Degree of the zero polynomial.  Below every integer; no arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MINUS_INFINITY"

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        if other is self:
            return False
        if isinstance(other, int):
            return True
        return NotImplemented

    def __hash__(self) -> int:
        return hash("MINUS_INFINITY")


MINUS_INFINITY = _MinusInfinity()


class VectorPolynomial:
    __slots__ = ("dim", "num_h", "terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Sequence[int]] | Iterable[tuple[Monomial, Sequence[int]]], dim: int, num_h: int = 0):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Monomial, Vec] = {}
        for (ze, he), c in items:
            he = tuple(int(e) for e in he)
            if len(he) != num_h:
                raise ValueError(f"monomial {(ze, he)} has {len(he)} h-exponents, expected {num_h}")
            if ze < 0 or any(e < 0 for e in he):
                raise ValueError("negative exponent")
            c = vec(c)
            if len(c) != dim:
                raise ValueError(f"coefficient {c} is not in Z^{dim}")
            key = (int(ze), he)
            acc[key] = vadd(acc[key], c) if key in acc else c
        clean = {k: v for k, v in sorted(acc.items()) if not is_zero(v)}
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "num_h", num_h)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", hash((dim, num_h, tuple(clean.items()))))

    def __setattr__(self, name, value):
        raise AttributeError("VectorPolynomial is immutable")

    @classmethod
    def _trusted(cls, terms: Mapping[Monomial, Vec], dim: int, num_h: int) -> "VectorPolynomial":
        """Build from already validated monomials, dropping zero coefficients."""
        self = object.__new__(cls)
        clean = {k: v for k, v in sorted(terms.items()) if not is_zero(v)}
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "num_h", num_h)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", hash((dim, num_h, tuple(clean.items()))))
        return self

    # -- construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, dim: int, num_h: int = 0) -> "VectorPolynomial":
        return cls({}, dim, num_h)

    @classmethod
    def from_z_coeffs(cls, coeffs: Sequence[Sequence[int]], dim: int | None = None) -> "VectorPolynomial":
        """Σ_i coeffs[i]·z^i, with coeffs[0] the constant term."""
        if dim is None:
            dim = len(coeffs[0])
        return cls({(i, ()): c for i, c in enumerate(coeffs)}, dim, 0)

    @classmethod
    def constant(cls, c: Sequence[int], num_h: int = 0) -> "VectorPolynomial":
        return cls({(0, (0,) * num_h): c}, len(c), num_h)

    # -- protocol ---------------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, VectorPolynomial)
            and self._hash == other._hash
            and self.dim == other.dim
            and self.num_h == other.num_h
            and self.terms == other.terms
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"VectorPolynomial({render(self)!r}, dim={self.dim}, num_h={self.num_h})"

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __iter__(self) -> Iterator[tuple[Monomial, Vec]]:
        return iter(self.terms.items())

    def __neg__(self) -> "VectorPolynomial":
        return VectorPolynomial({k: vneg(v) for k, v in self.terms.items()}, self.dim, self.num_h)

    def __add__(self, other: "VectorPolynomial") -> "VectorPolynomial":
        _compatible(self, other)
        return VectorPolynomial(list(self.terms.items()) + list(other.terms.items()), self.dim, self.num_h)

    def __sub__(self, other: "VectorPolynomial") -> "VectorPolynomial":
        return poly_sub(self, other)

    def __rmul__(self, k: int) -> "VectorPolynomial":
        return self.scale(k)

    def scale(self, k: int) -> "VectorPolynomial":
        return VectorPolynomial({m: vscale(k, c) for m, c in self.terms.items()}, self.dim, self.num_h)

    def is_zero(self) -> bool:
        return not self.terms

    def sort_key(self) -> tuple:
        return (self.dim, self.num_h, tuple(self.terms.items()))


def _compatible(P: VectorPolynomial, Q: VectorPolynomial) -> None:
    if P.dim != Q.dim:
        raise ValueError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    if P.num_h != Q.num_h:
        raise ValueError(f"h-arity mismatch: {P.num_h} vs {Q.num_h}; promote first")


def poly_sub(P: VectorPolynomial, Q: VectorPolynomial) -> VectorPolynomial:
    _compatible(P, Q)
    acc = dict(P.terms)
    for k, v in Q.terms.items():
        acc[k] = vsub(acc[k], v) if k in acc else vneg(v)
    return VectorPolynomial._trusted(acc, P.dim, P.num_h)


def promote_numH(P: VectorPolynomial, new_r: int) -> VectorPolynomial:
    """Pad h-exponents with zeros so the polynomial lives in ``new_r`` h-variables."""
    if new_r < P.num_h:
        raise ValueError("cannot drop h-variables by promotion")
    pad = (0,) * (new_r - P.num_h)
    return VectorPolynomial._trusted({(ze, he + pad): c for (ze, he), c in P.terms.items()}, P.dim, new_r)


def evaluate(P: VectorPolynomial, z: int, h: Sequence[int] = ()) -> Vec:
    if len(h) != P.num_h:
        raise ValueError(f"expected {P.num_h} h-values, got {len(h)}")
    out = zero(P.dim)
    for (ze, he), c in P.terms.items():
        m = checked(z**ze * math.prod(hv**e for hv, e in zip(h, he)))
        out = vadd(out, vscale(m, c))
    return out


def coeff_in_z(P: VectorPolynomial, i: int) -> VectorPolynomial:
    """γ_i(h): the coefficient of z^i, as a polynomial in h alone."""
    return VectorPolynomial._trusted({(0, he): c for (ze, he), c in P.terms.items() if ze == i}, P.dim, P.num_h)


def deg_z(P: VectorPolynomial):
    if not P.terms:
        return MINUS_INFINITY
    return max(ze for ze, _ in P.terms)


def leading_coeff_z(P: VectorPolynomial) -> VectorPolynomial:
    if not P.terms:
        raise ValueError("the zero polynomial has no leading coefficient")
    return coeff_in_z(P, deg_z(P))


def deg_h(P: VectorPolynomial):
    """Total degree in the h-variables."""
    if not P.terms:
        return MINUS_INFINITY
    return max(sum(he) for _, he in P.terms)


def total_degree(P: VectorPolynomial):
    if not P.terms:
        return MINUS_INFINITY
    return max(ze + sum(he) for ze, he in P.terms)


def is_multilinear(P: VectorPolynomial) -> bool:
    return all(e <= 1 for _, he in P.terms for e in he)


def is_homogeneous_h(P: VectorPolynomial, degree: int) -> bool:
    return all(sum(he) == degree for _, he in P.terms)


def is_z_free(P: VectorPolynomial) -> bool:
    return all(ze == 0 for ze, _ in P.terms)


def vanishes_at_zero(P: VectorPolynomial) -> bool:
    """True when P(0, h) is identically zero."""
    return all(ze > 0 for ze, _ in P.terms)


def strip_constant(P: VectorPolynomial) -> VectorPolynomial:
    """P − P(0, h)."""
    return VectorPolynomial._trusted({k: c for k, c in P.terms.items() if k[0] > 0}, P.dim, P.num_h)


def sigma_shift(Q: VectorPolynomial) -> VectorPolynomial:
    """σQ(z, h, h') = Q(z + h', h) − Q(h', h), with h' appended as the last h-variable."""
    r = Q.num_h
    out: dict[Monomial, Vec] = {}
    for (ze, he), c in Q.terms.items():
        for k in range(1, ze + 1):
            # distinct (ze, he) give distinct (k, he, ze − k), so no accumulation is needed
            out[(k, he + (ze - k,))] = vscale(math.comb(ze, k), c)
    return VectorPolynomial._trusted(out, Q.dim, r + 1)


def substitute_z_shift(P: VectorPolynomial, shift_vars: Sequence[int], num_h: int) -> VectorPolynomial:
    """P(z + Σ_{i∈shift_vars} h_i) for a polynomial P in z alone, as a polynomial in ``num_h`` h-variables."""
    if P.num_h:
        raise ValueError("expected a polynomial in z alone")
    shift_vars = list(shift_vars)
    if any(not 0 <= i < num_h for i in shift_vars):
        raise ValueError("shift variable out of range")
    out: list[tuple[Monomial, Vec]] = []
    for (n, _), c in P.terms.items():
        # multinomial expansion of (z + h_a + h_b + ...)^n
        for exps in _compositions(n, len(shift_vars) + 1):
            coef = math.factorial(n)
            for e in exps:
                coef //= math.factorial(e)
            he = [0] * num_h
            for i, e in zip(shift_vars, exps[1:]):
                he[i] += e
            out.append(((exps[0], tuple(he)), vscale(coef, c)))
    return VectorPolynomial(out, P.dim, num_h)


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def multinomial(u: Sequence[int], i: int) -> int:
    """(|u| + i)! / (u_1!···u_r!·i!)."""
    out = math.factorial(sum(u) + i) // math.factorial(i)
    for e in u:
        out //= math.factorial(e)
    return out


def h_monomials(P: VectorPolynomial) -> dict[tuple[int, ...], Vec]:
    """Coefficient map u ↦ γ_u of a polynomial in h only."""
    if not is_z_free(P):
        raise ValueError("expected a polynomial in h only")
    return {he: c for (_, he), c in P.terms.items()}


# ---------------------------------------------------------------------------
# text rendering and parsing


def _mono_text(ze: int, he: Sequence[int]) -> list[str]:
    parts = []
    if ze:
        parts.append("z" if ze == 1 else f"z^{ze}")
    for i, e in enumerate(he, start=1):
        if e:
            parts.append(f"h{i}" if e == 1 else f"h{i}^{e}")
    return parts


def render(P: VectorPolynomial) -> str:
    """Human-readable text such as ``2*h1*h2*e1 + h1*e2``; parseable by :func:`parse_polynomial`."""
    if not P.terms:
        return "0"
    pieces: list[tuple[int, str]] = []
    keys = sorted(P.terms, key=lambda k: (-(k[0] + sum(k[1])), -k[0], tuple(-e for e in k[1])))
    for ze, he in keys:
        c = P.terms[(ze, he)]
        for b, a in enumerate(c, start=1):
            if not a:
                continue
            factors = _mono_text(ze, he)
            if P.dim > 1:
                factors.append(f"e{b}")
            mag = abs(a)
            if mag != 1 or not factors:
                factors.insert(0, str(mag))
            pieces.append((1 if a > 0 else -1, "*".join(factors)))
    text = ("-" if pieces[0][0] < 0 else "") + pieces[0][1]
    for sign, body in pieces[1:]:
        text += (" - " if sign < 0 else " + ") + body
    return text


class ParseError(ValueError):
    def __init__(self, message: str, pos: int, text: str):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.pos = pos
        self.text = text


_TOKEN = re.compile(r"\s*(?:(\d+)|(z|h\d+|e\d+)|([-+*^()]))")

# an intermediate expression: (z_exp, h_exps, basis index or 0 for scalar) -> int
_Expr = dict


class _Parser:
    def __init__(self, text: str, dim: int, num_h: int | None):
        self.text = text
        self.dim = dim
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                if text[pos:].strip() == "":
                    break
                raise ParseError("unexpected character", pos + (len(text[pos:]) - len(text[pos:].lstrip())), text)
            start = m.start(m.lastindex)
            if m.group(1):
                self.tokens.append(("int", m.group(1), start))
            elif m.group(2):
                self.tokens.append(("var", m.group(2), start))
            else:
                self.tokens.append(("op", m.group(3), start))
            pos = m.end()
        hs = [int(v[1:]) for kind, v, _ in self.tokens if kind == "var" and v[0] == "h"]
        max_h = max(hs, default=0)
        for kind, v, p in self.tokens:
            if kind == "var" and v[0] == "h" and int(v[1:]) == 0:
                raise ParseError("h-variables are numbered from 1", p, text)
            if kind == "var" and v[0] == "e" and not 1 <= int(v[1:]) <= dim:
                raise ParseError(f"basis vector {v} outside dimension {dim}", p, text)
        if num_h is None:
            num_h = max_h
        elif max_h > num_h:
            raise ParseError(f"h{max_h} exceeds the declared {num_h} h-variables", 0, text)
        self.num_h = num_h
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self) -> VectorPolynomial:
        if not self.tokens:
            raise ParseError("empty polynomial", 0, self.text)
        e = self.expr()
        kind, v, p = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {v!r}", p, self.text)
        terms: list[tuple[Monomial, Vec]] = []
        for (ze, he, b), a in e.items():
            if not a:
                continue
            if b == 0:
                if self.dim != 1:
                    raise ParseError("scalar term without a basis vector", 0, self.text)
                b = 1
            terms.append(((ze, he), vscale(a, unit(b, self.dim))))
        return VectorPolynomial(terms, self.dim, self.num_h)

    def expr(self) -> _Expr:
        out = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            out = _eadd(out, rhs, -1 if op == "-" else 1)
        return out

    def term(self) -> _Expr:
        out = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            p = self.take()[2]
            out = self._mul(out, self.unary(), p)
        return out

    def unary(self) -> _Expr:
        if self.peek()[0] == "op" and self.peek()[1] in ("-", "+"):
            op = self.take()[1]
            inner = self.unary()
            return {k: -v for k, v in inner.items()} if op == "-" else inner
        return self.power()

    def power(self) -> _Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            p = self.take()[2]
            kind, v, q = self.take()
            if kind != "int":
                raise ParseError("exponent must be a nonnegative integer", q, self.text)
            out = {(0, (0,) * self.num_h, 0): 1}
            for _ in range(int(v)):
                out = self._mul(out, base, p)
            return out
        return base

    def atom(self) -> _Expr:
        kind, v, p = self.take()
        zeros = (0,) * self.num_h
        if kind == "int":
            return {(0, zeros, 0): int(v)}
        if kind == "var":
            if v == "z":
                return {(1, zeros, 0): 1}
            if v[0] == "h":
                he = list(zeros)
                he[int(v[1:]) - 1] = 1
                return {(0, tuple(he), 0): 1}
            return {(0, zeros, int(v[1:])): 1}
        if kind == "op" and v == "(":
            inner = self.expr()
            kind2, v2, p2 = self.take()
            if v2 != ")":
                raise ParseError("expected ')'", p2, self.text)
            return inner
        raise ParseError(f"unexpected {v or 'end of input'!r}", p, self.text)

    def _mul(self, a: _Expr, b: _Expr, pos: int) -> _Expr:
        out: _Expr = {}
        for (za, ha, ba), x in a.items():
            for (zb, hb, bb), y in b.items():
                if ba and bb:
                    raise ParseError("product of two basis vectors", pos, self.text)
                key = (za + zb, tuple(i + j for i, j in zip(ha, hb)), ba or bb)
                out[key] = checked(out.get(key, 0) + x * y)
        return out


def _eadd(a: _Expr, b: _Expr, sign: int) -> _Expr:
    out = dict(a)
    for k, v in b.items():
        out[k] = checked(out.get(k, 0) + sign * v)
    return out


def parse_polynomial(text: str, dim: int, num_h: int | None = None) -> VectorPolynomial:
    """Parse the small text grammar: integers, + - * ^, parentheses, z, h1.., e1..eD.

    For ``dim == 1`` a bare integer means that multiple of e1.
    """
    return _Parser(text, dim, num_h).parse()


def parse_family(texts: Sequence[str] | str, dim: int) -> list[VectorPolynomial]:
    """Parse a list of polynomials (or one string with ';'-separated members) on a common h-arity."""
    if isinstance(texts, str):
        texts = [t for t in texts.split(";") if t.strip()]
    polys = [parse_polynomial(t, dim) for t in texts]
    r = max((p.num_h for p in polys), default=0)
    return [promote_numH(p, r) for p in polys]
