"""Box norms, multiplicative derivatives and counting operators on Z^D.

Functions are finitely supported and stored densely on their bounding box.
Every box-norm routine returns the 2^s-th power of the norm, never the root.

Two evaluation strategies are provided.  :func:`box_norm_power` sums over the
Fejér-kernel supports and closes the last level with an FFT autocorrelation.
:func:`box_norm_power_direct` averages over the pairs (h_i, h_i') drawn from
the multisets themselves and uses no FFT, so it serves as an oracle for the
first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import fft as sfft

from .lattice import FejerKernel, IntMultiset, Vec, fejer, fejer_interval_weight, vec
from .polyalg import VectorPolynomial, evaluate

ONE_BOUND_SLACK = 1e-12
REL_TOL = 1e-9
ABS_SLACK = 1e-6

# complex entries per FFT batch
_BATCH_BUDGET = 1 << 22


class LatticeFunction:
    """A finitely supported function Z^D → C, stored on the box origin + [0, shape)."""

    __slots__ = ("origin", "values")

    def __init__(self, origin: Sequence[int], values: np.ndarray):
        values = np.array(values, dtype=np.complex128)
        if values.ndim != len(origin):
            raise ValueError("origin and value array disagree on the dimension")
        values.setflags(write=False)
        object.__setattr__(self, "origin", vec(origin))
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("LatticeFunction is immutable")

    # -- constructors -----------------------------------------------------------
    @classmethod
    def from_points(cls, points: Mapping[Sequence[int], complex] | Iterable[tuple[Sequence[int], complex]], dim: int) -> "LatticeFunction":
        items = list(points.items() if isinstance(points, Mapping) else points)
        if not items:
            return cls.zero(dim)
        pts = np.array([p for p, _ in items], dtype=np.int64).reshape(len(items), dim)
        lo = pts.min(axis=0)
        shape = pts.max(axis=0) - lo + 1
        arr = np.zeros(tuple(shape), dtype=np.complex128)
        for (p, v), row in zip(items, pts - lo):
            arr[tuple(row)] += v
        return cls(tuple(int(c) for c in lo), arr)

    @classmethod
    def zero(cls, dim: int) -> "LatticeFunction":
        return cls((0,) * dim, np.zeros((0,) * dim))

    @classmethod
    def indicator_box(cls, N: int, dim: int, lo: Sequence[int] | None = None) -> "LatticeFunction":
        """Indicator of [N]^dim = {1..N}^dim, or of lo + [0, N)^dim."""
        start = tuple(lo) if lo is not None else (1,) * dim
        return cls(start, np.ones((N,) * dim))

    @classmethod
    def indicator_of(cls, points: Iterable[Sequence[int]], dim: int) -> "LatticeFunction":
        return cls.from_points({tuple(p): 1.0 for p in points}, dim)

    @classmethod
    def random_pm1(cls, rng: np.random.Generator, N: int, dim: int) -> "LatticeFunction":
        """Independent uniform ±1 values on [N]^dim."""
        return cls((1,) * dim, rng.choice(np.array([-1.0, 1.0]), size=(N,) * dim))

    @classmethod
    def random_unimodular(cls, rng: np.random.Generator, N: int, dim: int) -> "LatticeFunction":
        """Independent uniform unit-modulus values on [N]^dim."""
        return cls((1,) * dim, np.exp(2j * np.pi * rng.random((N,) * dim)))

    @classmethod
    def random_bounded(cls, rng: np.random.Generator, N: int, dim: int) -> "LatticeFunction":
        """Independent values uniform in the closed unit disc on [N]^dim."""
        shape = (N,) * dim
        radius = np.sqrt(rng.random(shape))
        return cls((1,) * dim, radius * np.exp(2j * np.pi * rng.random(shape)))

    # -- basic queries ------------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.origin)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def __call__(self, x: Sequence[int]) -> complex:
        idx = tuple(xi - oi for xi, oi in zip(x, self.origin))
        if all(0 <= i < n for i, n in zip(idx, self.shape)):
            return complex(self.values[idx])
        return 0j

    def items(self) -> Iterable[tuple[Vec, complex]]:
        for idx in np.argwhere(self.values != 0):
            yield tuple(int(o + i) for o, i in zip(self.origin, idx)), complex(self.values[tuple(idx)])

    def support(self) -> list[Vec]:
        return [p for p, _ in self.items()]

    def is_one_bounded(self, slack: float = ONE_BOUND_SLACK) -> bool:
        return bool(np.all(np.abs(self.values) <= 1 + slack))

    def total(self) -> complex:
        return complex(self.values.sum())

    def l2sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def conj(self) -> "LatticeFunction":
        return LatticeFunction(self.origin, np.conj(self.values))

    def shifted(self, v: Sequence[int]) -> "LatticeFunction":
        """The function x ↦ f(x + v)."""
        return LatticeFunction(tuple(o - c for o, c in zip(self.origin, v)), self.values)

    def window(self, origin: Sequence[int], shape: Sequence[int]) -> np.ndarray:
        """Values on origin + [0, shape), zero outside the stored box."""
        return _window(self.values, self.origin, origin, shape)

    def multiply(self, other: "LatticeFunction") -> "LatticeFunction":
        """Pointwise product on the intersection of the two boxes."""
        lo = [max(a, b) for a, b in zip(self.origin, other.origin)]
        hi = [min(a + n, b + m) for a, n, b, m in zip(self.origin, self.shape, other.origin, other.shape)]
        shape = [max(0, h - l) for l, h in zip(lo, hi)]
        return LatticeFunction(lo, self.window(lo, shape) * other.window(lo, shape))

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "points": [[list(p), [v.real, v.imag]] for p, v in self.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "LatticeFunction":
        return cls.from_points([(tuple(p), complex(v[0], v[1])) for p, v in data["points"]], data["dim"])


def _window(values: np.ndarray, src_origin: Sequence[int], origin: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    out = np.zeros(tuple(shape), dtype=values.dtype)
    src, dst = [], []
    for so, n, o, m in zip(src_origin, values.shape, origin, shape):
        lo = max(so, o)
        hi = min(so + n, o + m)
        if hi <= lo:
            return out
        src.append(slice(lo - so, hi - so))
        dst.append(slice(lo - o, hi - o))
    out[tuple(dst)] = values[tuple(src)]
    return out


def _shift(arr: np.ndarray, h: Sequence[int]) -> np.ndarray:
    """Array whose entry at x is arr[x + h], with zero fill."""
    return _window(arr, (0,) * arr.ndim, tuple(h), arr.shape)


# ---------------------------------------------------------------------------
# multiplicative derivatives


def mult_derivative(f: LatticeFunction, h: Sequence[int]) -> LatticeFunction:
    """Δ_h f(x) = f(x)·conj f(x + h)."""
    if len(h) != f.dim:
        raise ValueError("dimension mismatch")
    return LatticeFunction(f.origin, f.values * np.conj(_shift(f.values, h)))


def mult_derivative_pair(f: LatticeFunction, h: Sequence[int], h2: Sequence[int]) -> LatticeFunction:
    """Δ'_{(h,h')} f(x) = f(x + h)·conj f(x + h')."""
    if len(h) != f.dim or len(h2) != f.dim:
        raise ValueError("dimension mismatch")
    return f.shifted(h).multiply(f.shifted(h2).conj())


@dataclass(frozen=True)
class NormReport:
    power: float
    s: int
    tolerance: float
    imag: float = 0.0

    def root(self) -> float:
        """The norm itself, clamping tiny negative rounding to zero."""
        return max(self.power, 0.0) ** (1.0 / 2**self.s)


def _check_multisets(f: LatticeFunction, E: Sequence[IntMultiset]) -> None:
    if not E:
        raise ValueError("need at least one multiset")
    for Ei in E:
        if Ei.is_empty():
            raise ValueError("empty multiset")
        if Ei.dim != f.dim:
            raise ValueError(f"multiset dimension {Ei.dim} does not match function dimension {f.dim}")


def _tolerance(f: LatticeFunction, s: int) -> float:
    scale = float(np.sum(np.abs(f.values) ** (2**s))) if f.values.size else 0.0
    return REL_TOL * max(1.0, scale)


# ---------------------------------------------------------------------------
# kernel form


def _kernel_arrays(K: FejerKernel, shape: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Support points and weights, dropping shifts that leave the box entirely."""
    pts, w = K.as_arrays()
    keep = np.all(np.abs(pts) < np.array(shape, dtype=np.int64), axis=1) if len(shape) else np.ones(len(pts), bool)
    return pts[keep], w[keep]


def _fft_shape(shape: Sequence[int]) -> tuple[int, ...]:
    return tuple(sfft.next_fast_len(2 * n - 1) for n in shape)


def _autocorr_dot(stack: np.ndarray, pts: np.ndarray, w: np.ndarray) -> np.ndarray:
    """For each array g in the stack, Σ_h w(h)·Σ_x g(x)·conj g(x + h)."""
    D = stack.ndim - 1
    if stack.shape[0] == 0 or len(w) == 0:
        return np.zeros(stack.shape[0], dtype=np.complex128)
    P = _fft_shape(stack.shape[1:])
    axes = tuple(range(1, D + 1))
    spec = sfft.fftn(stack, s=P, axes=axes)
    # ifft(|F|^2)(h) = Σ_x conj g(x) g(x+h), the conjugate of the wanted correlation
    corr = sfft.ifftn(spec.real**2 + spec.imag**2, s=P, axes=axes)
    flat_idx = np.ravel_multi_index(tuple((pts % np.array(P)).T), P)
    vals = corr.reshape(stack.shape[0], -1)[:, flat_idx]
    return np.conj(vals @ w)


def _batched_level(G: np.ndarray, pts_a: np.ndarray, w_a: np.ndarray, pts_b: np.ndarray, w_b: np.ndarray) -> complex:
    """Σ_a w_a(a) Σ_b w_b(b) Σ_x Δ_b Δ_a G(x), batching the a-derivatives through one FFT pass."""
    total = 0j
    per = max(1, _BATCH_BUDGET // max(1, math.prod(_fft_shape(G.shape))))
    for start in range(0, len(w_a), per):
        chunk = pts_a[start:start + per]
        stack = np.stack([G * np.conj(_shift(G, a)) for a in chunk])
        total += complex(np.dot(w_a[start:start + per], _autocorr_dot(stack, pts_b, w_b)))
    return total


def _kernel_power(G: np.ndarray, kernels: list[tuple[np.ndarray, np.ndarray]]) -> complex:
    if len(kernels) == 1:
        pts, w = kernels[0]
        return complex(_autocorr_dot(G[None], pts, w)[0])
    if len(kernels) == 2:
        return _batched_level(G, *kernels[0], *kernels[1])
    pts, w = kernels[0]
    total = 0j
    for a, wa in zip(pts, w):
        g = G * np.conj(_shift(G, a))
        if np.any(g):
            total += wa * _kernel_power(g, kernels[1:])
    return total


def box_norm_power(f: LatticeFunction, E: Sequence[IntMultiset]) -> NormReport:
    """Σ_{x,h_1..h_s} μ_{E_1}(h_1)···μ_{E_s}(h_s)·Δ_{h_1..h_s} f(x)."""
    _check_multisets(f, E)
    s = len(E)
    tol = _tolerance(f, s)
    if f.values.size == 0 or not np.any(f.values):
        return NormReport(0.0, s, tol)
    kernels = [_kernel_arrays(fejer(Ei), f.shape) for Ei in E]
    # the value is symmetric in the E_i; put the widest kernel in the FFT slot
    kernels.sort(key=lambda kw: len(kw[1]))
    value = _kernel_power(f.values, kernels)
    return NormReport(float(value.real), s, tol, float(value.imag))


# ---------------------------------------------------------------------------
# direct form


def _pair_level(G: np.ndarray, E: IntMultiset, rest: Sequence[IntMultiset]) -> complex:
    pts = E.support()
    mult = [E.mult(p) for p in pts]
    norm = E.total**2
    if not rest:
        # E_{h,h'} Σ_x G(x+h)·conj G(x+h') = |E|^{-2} Σ_x |Σ_h m(h) G(x+h)|^2
        acc = np.zeros_like(G)
        for p, m in zip(pts, mult):
            acc += m * _shift(G, p)
        return complex(np.sum(np.abs(acc) ** 2)) / norm
    total = 0j
    shifted = [_shift(G, p) for p in pts]
    for a, ma in zip(shifted, mult):
        if not np.any(a):
            continue
        for b, mb in zip(shifted, mult):
            g = a * np.conj(b)
            if np.any(g):
                total += ma * mb * _pair_level(g, rest[0], rest[1:])
    return total / norm


def box_norm_power_direct(f: LatticeFunction, E: Sequence[IntMultiset]) -> NormReport:
    """E_{h_i, h_i' ∈ E_i} Σ_x Δ'_{(h_1,h_1'),…,(h_s,h_s')} f(x), by explicit pair averaging."""
    _check_multisets(f, E)
    s = len(E)
    tol = _tolerance(f, s)
    if f.values.size == 0 or not np.any(f.values):
        return NormReport(0.0, s, tol)
    pad = sum(Ei.max_abs() for Ei in E)
    canvas = np.pad(f.values, pad)
    value = _pair_level(canvas, E[0], list(E[1:]))
    return NormReport(float(value.real), s, tol, float(value.imag))


def box_norm_power_inductive(f: LatticeFunction, E: Sequence[IntMultiset], k: int) -> NormReport:
    """Average of the degree-(s−k) box norms of Δ'-derivatives taken along the first k multisets."""
    _check_multisets(f, E)
    s = len(E)
    if not 0 <= k < s:
        raise ValueError("k must satisfy 0 <= k < s")
    tol = _tolerance(f, s)

    def rec(g: LatticeFunction, level: int) -> complex:
        if level == k:
            return complex(box_norm_power(g, E[k:]).power) if np.any(g.values) else 0j
        Ei = E[level]
        out = 0j
        for h, m in Ei.weights.items():
            for h2, m2 in Ei.weights.items():
                out += m * m2 * rec(mult_derivative_pair(g, h, h2), level + 1)
        return out / Ei.total**2

    total = rec(f, 0)
    return NormReport(float(total.real), s, tol, float(total.imag))


# ---------------------------------------------------------------------------
# Gowers–Cauchy–Schwarz inner product


def _gcs_level(fs: dict[tuple[int, ...], np.ndarray], kernels: list[tuple[np.ndarray, np.ndarray]]) -> complex:
    pts, w = kernels[0]
    if len(kernels) == 1:
        g0, g1 = fs[(0,)], fs[(1,)]
        if not np.any(g0) or not np.any(g1) or len(w) == 0:
            return 0j
        P = _fft_shape(g0.shape)
        spec = np.conj(sfft.fftn(g0, s=P)) * sfft.fftn(g1, s=P)
        # ifft gives Σ_x conj g0(x) g1(x+h); conjugate for Σ_x g0(x) conj g1(x+h)
        corr = np.conj(sfft.ifftn(spec, s=P))
        idx = tuple((pts % np.array(P)).T)
        return complex(np.dot(corr[idx], w))
    total = 0j
    tails = list(itertools.product((0, 1), repeat=len(kernels) - 1))
    for a, wa in zip(pts, w):
        nxt = {e: fs[(0,) + e] * np.conj(_shift(fs[(1,) + e], a)) for e in tails}
        if all(np.any(v) for v in nxt.values()):
            total += wa * _gcs_level(nxt, kernels[1:])
    return total


def gcs_inner(fs: Mapping[tuple[int, ...], LatticeFunction], E: Sequence[IntMultiset]) -> complex:
    """Σ_{x,h} Π μ_{E_i}(h_i) Π_ε C^{|ε|} f_ε(x + ε·h); ε[i] pairs with E[i]."""
    s = len(E)
    keys = list(itertools.product((0, 1), repeat=s))
    if s == 0 or set(fs) != set(keys):
        raise ValueError(f"expected exactly 2^{s} functions indexed by {{0,1}}^{s}")
    dims = {g.dim for g in fs.values()}
    if len(dims) != 1:
        raise ValueError("functions live in different dimensions")
    dim = dims.pop()
    _check_multisets(LatticeFunction.zero(dim), E)
    nonempty = [g for g in fs.values() if g.values.size]
    if len(nonempty) < len(fs):
        return 0j
    lo = [min(g.origin[i] for g in nonempty) for i in range(dim)]
    hi = [max(g.origin[i] + g.shape[i] for g in nonempty) for i in range(dim)]
    shape = [b - a for a, b in zip(lo, hi)]
    arrays = {e: fs[e].window(lo, shape) for e in keys}
    kernels = [_kernel_arrays(fejer(Ei), shape) for Ei in E]
    return _gcs_level(arrays, kernels)


# ---------------------------------------------------------------------------
# counting operators


def counting_operator(fs: Sequence[LatticeFunction], Ps: Sequence[VectorPolynomial], K: int) -> complex:
    """Σ_x E_{z∈[K]} f_0(x)·Π_j f_j(x + P_j(z))."""
    if len(fs) != len(Ps) + 1:
        raise ValueError(f"need {len(Ps) + 1} functions for {len(Ps)} polynomials")
    if K < 1:
        raise ValueError("K must be positive")
    for P in Ps:
        if P.num_h:
            raise ValueError("counting operator polynomials must be in z alone")
        if P.dim != fs[0].dim:
            raise ValueError("dimension mismatch")
    f0 = fs[0]
    if f0.values.size == 0:
        return 0j
    total = 0j
    for z in range(1, K + 1):
        prod = f0.values.copy()
        for f, P in zip(fs[1:], Ps):
            v = evaluate(P, z)
            prod *= f.window([o + c for o, c in zip(f0.origin, v)], f0.shape)
            if not np.any(prod):
                break
        total += complex(prod.sum())
    return total / K


def averaged_counting_operator(f: LatticeFunction, P: VectorPolynomial, K: int, r: int) -> complex:
    """Σ_h μ_K(h) Σ_x E_{z∈[K]} Π_{ε∈{0,1}^r} C^{|ε|} f(x + P(z + ε·h)), μ_K(h) = Π_i μ_{[±K]}(h_i).

    The value is complex in general; it is real for symmetric configurations.
    """
    if f.dim != 1 or P.dim != 1:
        raise ValueError("the averaged operator is defined on Z")
    if P.num_h or not P.terms or max(ze for ze, _ in P.terms) < 1:
        raise ValueError("need a nonconstant polynomial in z alone")
    if K < 1 or r < 1:
        raise ValueError("K and r must be positive")
    if f.values.size == 0:
        return 0j
    eps = list(itertools.product((0, 1), repeat=r))
    weights = {h: float(fejer_interval_weight(h, K)) for h in range(-2 * K, 2 * K + 1)}
    (start,), (n,) = f.origin, f.shape
    total = 0j
    for hs in itertools.product(range(-2 * K, 2 * K + 1), repeat=r):
        w = math.prod(weights[h] for h in hs)
        if w == 0:
            continue
        inner = 0j
        for z in range(1, K + 1):
            # substitute x -> x - P(z) so the ε = 0 factor is f(x) and x runs over f's window
            base = evaluate(P, z)[0]
            prod = None
            for e in eps:
                v = evaluate(P, z + sum(a * b for a, b in zip(e, hs)))[0] - base
                vals = _window(f.values, (start,), (start + v,), (n,))
                if sum(e) % 2:
                    vals = np.conj(vals)
                prod = vals if prod is None else prod * vals
            inner += complex(prod.sum())
        total += w * inner / K
    return total


# ---------------------------------------------------------------------------
# van der Corput inequalities


@dataclass(frozen=True)
class VdcReport:
    lhs: float
    rhs_symmetric: float
    rhs_asymmetric: float
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs_symmetric + self.tolerance and self.lhs <= self.rhs_asymmetric + self.tolerance


def vdc_inequality_check(seq: Sequence[complex], H: int, tolerance: float = 1e-12) -> VdcReport:
    """Both sides of the symmetric and asymmetric van der Corput inequalities for f on [K]."""
    f = np.asarray(seq, dtype=np.complex128)
    K = len(f)
    if H < 1 or H >= K:
        raise ValueError("need 1 <= H < K")
    if np.any(np.abs(f) > 1 + ONE_BOUND_SLACK):
        raise ValueError("sequence is not 1-bounded")
    lhs = abs(f.mean()) ** 2
    factor = (K + 2 * H) / K
    # symmetric: E_{h,h'} (1/K) Σ_x f(x) conj f(x') over x = z+h, x' = z+h' both in [K]
    #          = (1/(K (2H+1)^2)) Σ_z |Σ_{|h|<=H} f(z+h)|^2 over all integers z
    padded = np.concatenate([np.zeros(H, complex), f, np.zeros(H, complex)])
    window_sums = np.convolve(padded, np.ones(2 * H + 1), mode="full")
    sym = float(np.sum(np.abs(window_sums) ** 2)) / (K * (2 * H + 1) ** 2)
    asym = 0j
    for h in range(-2 * H, 2 * H + 1):
        w = float(fejer_interval_weight(h, H))
        if abs(h) >= K:
            continue
        if h >= 0:
            s = np.sum(f[: K - h] * np.conj(f[h:]))
        else:
            s = np.sum(f[-h:] * np.conj(f[: K + h]))
        asym += w * s
    return VdcReport(float(lhs), factor * sym, factor * float(asym.real) / K, tolerance)
