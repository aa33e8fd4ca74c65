"""Exact integer-lattice primitives.

Vectors are plain tuples of Python ints.  Multisets of vectors carry exact
multiplicities, and Fejér kernels carry exact ``Fraction`` weights.  Integer
results are range-checked against a signed 128-bit window unless the
arbitrary-precision escape hatch is switched on.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy import signal

Vec = tuple[int, ...]

INT_BOUND = 2**127
DEFAULT_EXPANSION_CAP = 10**8

_ARBITRARY = contextvars.ContextVar("petbox_arbitrary_precision", default=False)


class CapExceeded(RuntimeError):
    """Raised when an enumeration or expansion would exceed its configured size cap."""


@contextlib.contextmanager
def arbitrary_precision(enabled: bool = True) -> Iterator[None]:
    """Disable (or re-enable) the 128-bit overflow check inside the block."""
    token = _ARBITRARY.set(enabled)
    try:
        yield
    finally:
        _ARBITRARY.reset(token)


def checked(n: int) -> int:
    """Return ``n`` unchanged, raising ``OverflowError`` outside the signed 128-bit range."""
    if not _ARBITRARY.get() and not (-INT_BOUND <= n < INT_BOUND):
        raise OverflowError(f"integer {n} does not fit in 128 signed bits")
    return n


def vec(coords: Iterable[int]) -> Vec:
    return tuple(checked(int(c)) for c in coords)


def zero(dim: int) -> Vec:
    return (0,) * dim


def unit(i: int, dim: int) -> Vec:
    """The basis vector e_i (1-based) of Z^dim."""
    if not 1 <= i <= dim:
        raise ValueError(f"basis index {i} outside 1..{dim}")
    return tuple(1 if k == i - 1 else 0 for k in range(dim))


def vadd(a: Vec, b: Vec) -> Vec:
    _same_dim(a, b)
    return tuple(checked(x + y) for x, y in zip(a, b))


def vsub(a: Vec, b: Vec) -> Vec:
    _same_dim(a, b)
    return tuple(checked(x - y) for x, y in zip(a, b))


def vneg(a: Vec) -> Vec:
    return tuple(-x for x in a)


def vscale(k: int, a: Vec) -> Vec:
    return tuple(checked(k * x) for x in a)


def is_zero(a: Vec) -> bool:
    return not any(a)


def _same_dim(a: Sequence[int], b: Sequence[int]) -> None:
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")


# ---------------------------------------------------------------------------
# multisets


@dataclass(frozen=True)
class IntMultiset:
    """A finite multiset of lattice vectors with positive integer multiplicities."""

    dim: int
    weights: Mapping[Vec, int]
    total: int = field(init=False)

    def __init__(self, weights: Mapping[Sequence[int], int] | Iterable[tuple[Sequence[int], int]], dim: int | None = None):
        items = weights.items() if isinstance(weights, Mapping) else weights
        clean: dict[Vec, int] = {}
        for v, m in items:
            v = vec(v)
            m = int(m)
            if m < 0:
                raise ValueError(f"negative multiplicity {m} at {v}")
            if m:
                clean[v] = clean.get(v, 0) + m
        dims = {len(v) for v in clean}
        if dim is None:
            if len(dims) != 1:
                raise ValueError("cannot infer dimension of an empty or ragged multiset")
            dim = dims.pop()
        elif dims and dims != {dim}:
            raise ValueError(f"vectors do not all have dimension {dim}")
        ordered = dict(sorted(clean.items()))
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "weights", MappingProxyType(ordered))
        object.__setattr__(self, "total", checked(sum(ordered.values())))

    @classmethod
    def of_points(cls, points: Iterable[Sequence[int]], dim: int | None = None) -> "IntMultiset":
        counts: dict[Vec, int] = {}
        for p in points:
            p = vec(p)
            counts[p] = counts.get(p, 0) + 1
        return cls(counts, dim)

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self) -> Iterator[Vec]:
        return iter(self.weights)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IntMultiset) and self.dim == other.dim and dict(self.weights) == dict(other.weights)

    def __hash__(self) -> int:
        return hash((self.dim, tuple(self.weights.items())))

    def __repr__(self) -> str:
        body = ", ".join(f"{v}:{m}" for v, m in self.weights.items())
        return f"IntMultiset({{{body}}})"

    def mult(self, v: Sequence[int]) -> int:
        return self.weights.get(tuple(v), 0)

    def support(self) -> list[Vec]:
        return list(self.weights)

    def is_empty(self) -> bool:
        return self.total == 0

    def contains(self, other: "IntMultiset") -> bool:
        """Multiset inclusion: every multiplicity of ``other`` is at most ours."""
        return all(self.mult(v) >= m for v, m in other.weights.items())

    def max_abs(self) -> int:
        return max((abs(c) for v in self.weights for c in v), default=0)

    def to_json(self) -> dict:
        return {"dim": self.dim, "points": [[list(v), m] for v, m in self.weights.items()]}

    @classmethod
    def from_json(cls, data: Mapping) -> "IntMultiset":
        return cls([(tuple(v), m) for v, m in data["points"]], data["dim"])


def _dense(X: IntMultiset) -> tuple[Vec, np.ndarray]:
    pts = np.array(X.support(), dtype=np.int64).reshape(len(X), X.dim)
    lo = pts.min(axis=0)
    shape = tuple(pts.max(axis=0) - lo + 1)
    arr = np.zeros(shape, dtype=np.int64)
    arr[tuple((pts - lo).T)] = np.fromiter(X.weights.values(), dtype=np.int64, count=len(X))
    return tuple(int(c) for c in lo), arr


def _from_dense(origin: Vec, arr: np.ndarray, dim: int) -> IntMultiset:
    idx = np.argwhere(arr)
    return IntMultiset(
        ((tuple(int(o + i) for o, i in zip(origin, row)), int(arr[tuple(row)])) for row in idx),
        dim,
    )


_DENSE_LIMIT = 2**50


def _int_convolve(a: np.ndarray, b: np.ndarray, bound: int) -> np.ndarray | None:
    """Exact convolution of nonnegative integer arrays with entries summing to ``bound``, or None."""
    if a.size * b.size <= 4_000_000:
        return signal.convolve(a, b, method="direct")
    if bound >= _DENSE_LIMIT:
        return None
    out = signal.fftconvolve(a.astype(np.float64), b.astype(np.float64))
    return np.rint(out).astype(np.int64)


def _dict_sum(X: IntMultiset, Y: IntMultiset) -> IntMultiset:
    out: dict[Vec, int] = {}
    for u, m in X.weights.items():
        for v, n in Y.weights.items():
            w = vadd(u, v)
            out[w] = out.get(w, 0) + m * n
    return IntMultiset(out, X.dim)


def multiset_sum(X: IntMultiset, Y: IntMultiset) -> IntMultiset:
    """Minkowski sum with multiplicities: the weight function is the convolution of the two."""
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    if X.is_empty() or Y.is_empty():
        return IntMultiset({}, X.dim)
    total = checked(X.total * Y.total)
    if len(X) * len(Y) <= 2048 or total >= 2**62:
        return _dict_sum(X, Y)
    ox, ax = _dense(X)
    oy, ay = _dense(Y)
    # dense boxes only pay off when the supports fill them reasonably
    if ax.size > 64 * len(X) or ay.size > 64 * len(Y):
        return _dict_sum(X, Y)
    out = _int_convolve(ax, ay, total)
    if out is None:
        return _dict_sum(X, Y)
    return _from_dense(vadd(ox, oy), out, X.dim)


def multiset_negate(X: IntMultiset) -> IntMultiset:
    return IntMultiset({vneg(v): m for v, m in X.weights.items()}, X.dim)


def multiset_diff(X: IntMultiset, Y: IntMultiset) -> IntMultiset:
    return multiset_sum(X, multiset_negate(Y))


def support_sum(A: Iterable[Vec], B: Iterable[Vec]) -> set[Vec]:
    """The set (not multiset) sumset of two finite point sets."""
    B = list(B)
    return {vadd(a, b) for a in A for b in B}


# ---------------------------------------------------------------------------
# progressions


def progression(beta: Sequence[int], H: int) -> IntMultiset:
    """The dilated interval beta·[±H] as a multiset (beta = 0 gives {0} with multiplicity 2H+1)."""
    if H < 0:
        raise ValueError("half-length must be nonnegative")
    beta = vec(beta)
    return IntMultiset([(vscale(k, beta), 1) for k in range(-H, H + 1)], len(beta))


def interval(H: int) -> IntMultiset:
    """[±H] in Z."""
    return progression((1,), H)


@dataclass(frozen=True)
class GenArithProgression:
    """A generalized arithmetic progression Σ_i direction_i · [±halfLength_i]."""

    terms: tuple[tuple[Vec, int], ...]

    def __init__(self, terms: Iterable[tuple[Sequence[int], int]]):
        clean = []
        for d, H in terms:
            if int(H) < 0:
                raise ValueError("half-length must be nonnegative")
            clean.append((vec(d), int(H)))
        if not clean:
            raise ValueError("a progression needs at least one term")
        if len({len(d) for d, _ in clean}) != 1:
            raise ValueError("directions have different dimensions")
        object.__setattr__(self, "terms", tuple(clean))

    @property
    def dim(self) -> int:
        return len(self.terms[0][0])

    @property
    def size(self) -> int:
        return math.prod(2 * H + 1 for _, H in self.terms)

    def describe(self) -> str:
        return " + ".join(f"{list(d)}*[+-{H}]" for d, H in self.terms)

    def to_json(self) -> list:
        return [[list(d), H] for d, H in self.terms]

    @classmethod
    def from_json(cls, data: Sequence) -> "GenArithProgression":
        return cls((tuple(d), H) for d, H in data)


def cube(dim: int, H: int) -> GenArithProgression:
    """[±H]^dim written as Σ e_i·[±H]."""
    return GenArithProgression((unit(i, dim), H) for i in range(1, dim + 1))


def gap_expand(G: GenArithProgression, cap: int = DEFAULT_EXPANSION_CAP) -> IntMultiset:
    """Expand a progression into an explicit multiset, refusing totals above ``cap``."""
    if G.size > cap:
        raise CapExceeded(f"progression of size {G.size} exceeds the expansion cap {cap}")
    out = progression(*G.terms[0])
    for d, H in G.terms[1:]:
        out = multiset_sum(out, progression(d, H))
    return out


def iterated_sumset_family(H_list: Sequence[IntMultiset], indices: Sequence[int]) -> IntMultiset:
    """Sum of the multisets at the given distinct positions (0-based), in index order."""
    if not indices:
        raise ValueError("need at least one index")
    if len(set(indices)) != len(indices):
        raise ValueError(f"repeated index in {list(indices)}")
    for i in indices:
        if not 0 <= i < len(H_list):
            raise IndexError(f"index {i} out of range")
    out = H_list[indices[0]]
    for i in indices[1:]:
        out = multiset_sum(out, H_list[i])
    return out


# ---------------------------------------------------------------------------
# Fejér kernels


@dataclass(frozen=True)
class FejerKernel:
    """μ_E(h): the probability that two independent draws from E differ by h."""

    source: IntMultiset
    weights: Mapping[Vec, Fraction]

    @property
    def dim(self) -> int:
        return self.source.dim

    def __call__(self, h: Sequence[int]) -> Fraction:
        return self.weights.get(tuple(h), Fraction(0))

    def support(self) -> list[Vec]:
        return list(self.weights)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Support points (n × D int array) and float weights."""
        pts = np.array(self.support(), dtype=np.int64).reshape(len(self.weights), self.dim)
        w = np.array([float(x) for x in self.weights.values()], dtype=np.float64)
        return pts, w


def fejer(E: IntMultiset) -> FejerKernel:
    if E.is_empty():
        raise ValueError("Fejér kernel of an empty multiset")
    counts = multiset_diff(E, E)
    denom = E.total * E.total
    weights = {h: Fraction(c, denom) for h, c in counts.weights.items()}
    return FejerKernel(E, MappingProxyType(weights))


def fejer_interval_weight(h: int, H: int) -> Fraction:
    """Closed form of μ_{[±H]}(h) = (1/(2H+1))·(1 − |h|/(2H+1))_+."""
    n = 2 * H + 1
    return max(Fraction(0), Fraction(1, n) * (1 - Fraction(abs(h), n)))
