"""Solution counting for linear and multilinear equations in boxes.

Linear counts use histogram convolution.  The multilinear normalized count
averages, over shift tuples h restricted to the generic sets H_{l,η}, the
probability that uniform coefficients m ∈ [±M] satisfy every equation
Σ_i h-monomial_u(i)·m_i = n_u.  For a fixed h each (j, k) block of the
system is independent and is counted exactly by meet-in-the-middle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .lattice import CapExceeded, checked

DEFAULT_MAX_STATES = 10**8


# ---------------------------------------------------------------------------
# linear equations and congruences


def _linear_histogram(h: Sequence[int], M: int) -> tuple[np.ndarray, int]:
    """Counts of Σ h_i m_i over [±M]^ℓ as a dense array with its offset (value = index − offset)."""
    hist = np.ones(1, dtype=np.int64)
    offset = 0
    for hi in h:
        step = abs(hi)
        single = np.zeros(2 * M * step + 1, dtype=np.int64)
        single[::step] = 1
        hist = np.convolve(hist, single)
        offset += M * step
    return hist, offset


def count_linear_solutions(h: Sequence[int], M: int, target: int) -> int:
    """#{m ∈ [±M]^ℓ : Σ h_i m_i = target}."""
    h = [int(x) for x in h]
    if not h:
        raise ValueError("need at least one coefficient")
    if any(x == 0 for x in h):
        raise ValueError("coefficients must be nonzero")
    if M < 1:
        raise ValueError("M must be positive")
    checked((2 * M + 1) ** len(h))
    checked(M * sum(abs(x) for x in h))
    hist, offset = _linear_histogram(h, M)
    idx = int(target) + offset
    return int(hist[idx]) if 0 <= idx < hist.size else 0


def max_linear_solutions(h: Sequence[int], M: int) -> int:
    """max over targets of count_linear_solutions(h, M, target)."""
    if any(x == 0 for x in h):
        raise ValueError("coefficients must be nonzero")
    return int(_linear_histogram([int(x) for x in h], M)[0].max())


def count_congruence_solutions(h: Sequence[int], modulus: int, M: int, target: int) -> int:
    """#{m ∈ [±M]^{ℓ−1} : Σ h_i m_i ≡ target (mod modulus)}."""
    if modulus == 0:
        raise ValueError("modulus must be nonzero")
    if M < 1:
        raise ValueError("M must be positive")
    q = abs(int(modulus))
    hist = np.zeros(q, dtype=np.int64)
    hist[0] = 1
    for hi in h:
        single = np.zeros(q, dtype=np.int64)
        np.add.at(single, (int(hi) * np.arange(-M, M + 1)) % q, 1)
        nxt = np.zeros(q, dtype=np.int64)
        for res in np.nonzero(single)[0]:
            nxt += single[res] * np.roll(hist, int(res))
        hist = nxt
    return int(hist[int(target) % q])


def linear_bound_rhs(h: Sequence[int], M: int) -> Fraction:
    """M^{ℓ−1}·gcd(h)/|h_ℓ| + M^{ℓ−2}."""
    h = [int(x) for x in h]
    if not h or h[-1] == 0:
        raise ValueError("last coefficient must be nonzero")
    ell = len(h)
    g = math.gcd(*h)
    return Fraction(M) ** (ell - 1) * Fraction(g, abs(h[-1])) + Fraction(M) ** (ell - 2)


# ---------------------------------------------------------------------------
# admissible index tuples and generic shift sets


@dataclass(frozen=True)
class AdmissibleIndexSet:
    """All r-tuples of strictly increasing ℓ-subsets of [t]."""

    t: int
    ell: int
    r: int
    tuples: tuple[tuple[tuple[int, ...], ...], ...]

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(self.tuples)


def enumerate_calK(t: int, ell: int, r: int) -> AdmissibleIndexSet:
    if ell > t:
        raise ValueError(f"ℓ = {ell} exceeds t = {t}")
    if min(t, ell, r) < 1:
        raise ValueError("t, ℓ and r must be positive")
    rows = list(itertools.combinations(range(1, t + 1), ell))
    return AdmissibleIndexSet(t, ell, r, tuple(itertools.product(rows, repeat=r)))


def _gcd_ok(a: int, b: int, eta: Fraction) -> bool:
    g = math.gcd(a, b)
    # gcd(0, 0) = 0 counts as an unbounded common factor
    return g != 0 and g * eta <= 1


def in_calH(values: Mapping[tuple[int, ...], int] | Sequence[int], l: int, t: int, eta, H: int) -> bool:
    """Membership of a tuple indexed by [t]^l in H_{l,η}.

    ``values`` is either a mapping from index tuples to integers or a flat
    sequence in lexicographic index order.  The conditions quantify over
    triples of pairwise distinct indices, so they are vacuous when t^l < 3.
    """
    eta = Fraction(eta)
    if eta <= 0:
        raise ValueError("η must be positive")
    flat = _flatten(values, l, t)
    if any(abs(v) > H for v in flat):
        raise ValueError("values must lie in [±H]")
    n = len(flat)
    if n < 3:
        return True
    thresh = eta * H
    for a, c in itertools.permutations(range(n), 2):
        if abs(flat[a] - flat[c]) < thresh:
            return False
    for a, b, c in itertools.permutations(range(n), 3):
        if not _gcd_ok(flat[a] - flat[c], flat[b] - flat[c], eta):
            return False
    return True


def _flatten(values, l: int, t: int) -> list[int]:
    if isinstance(values, Mapping):
        keys = list(itertools.product(range(1, t + 1), repeat=l))
        return [int(values[k]) for k in keys]
    flat = [int(v) for v in values]
    if len(flat) != t**l:
        raise ValueError(f"expected {t**l} values")
    return flat


def _calH_mask(arr: np.ndarray, eta: Fraction, H: int) -> np.ndarray:
    """Row-wise membership for an (n, t^l) integer array."""
    n = arr.shape[1]
    ok = np.ones(arr.shape[0], dtype=bool)
    if n < 3:
        return ok
    for a, c in itertools.combinations(range(n), 2):
        ok &= np.abs(arr[:, a] - arr[:, c]) * eta.denominator >= eta.numerator * H
    for a, b, c in itertools.permutations(range(n), 3):
        if b < a:
            continue  # gcd is symmetric in its two arguments
        g = np.gcd(arr[:, a] - arr[:, c], arr[:, b] - arr[:, c])
        ok &= (g != 0) & (g * eta.numerator <= eta.denominator)
    return ok


@dataclass(frozen=True)
class DensityEstimate:
    value: float
    exact: Fraction | None
    std_error: float
    samples: int


def calH_density(
    l: int,
    t: int,
    eta,
    H: int,
    mode: str = "exact",
    seed: int = 0,
    n: int = 100_000,
    max_states: int = DEFAULT_MAX_STATES,
) -> DensityEstimate:
    """Fraction of [±H]^{t^l} outside H_{l,η}, exactly or by Monte Carlo."""
    eta = Fraction(eta)
    width = t**l
    side = 2 * H + 1
    if mode == "exact":
        total = side**width
        if total > max_states:
            raise CapExceeded(f"{total} tuples exceed the cap {max_states}")
        bad = 0
        for block in _product_blocks(H, width):
            bad += int((~_calH_mask(block, eta, H)).sum())
        frac = Fraction(bad, total)
        return DensityEstimate(float(frac), frac, 0.0, total)
    if mode == "sample":
        rng = np.random.default_rng(seed)
        arr = rng.integers(-H, H + 1, size=(n, width))
        bad = ~_calH_mask(arr, eta, H)
        p = float(bad.mean())
        return DensityEstimate(p, None, math.sqrt(p * (1 - p) / n), n)
    raise ValueError(f"unknown mode {mode!r}")


def _product_blocks(H: int, width: int, block: int = 1 << 20) -> Iterable[np.ndarray]:
    """All of [±H]^width in lexicographic order, in chunks of rows."""
    side = 2 * H + 1
    total = side**width
    for start in range(0, total, block):
        idx = np.arange(start, min(total, start + block), dtype=np.int64)
        cols = []
        for _ in range(width):
            cols.append(idx % side - H)
            idx = idx // side
        yield np.stack(cols[::-1], axis=1)


# ---------------------------------------------------------------------------
# multilinear systems


@dataclass(frozen=True)
class MultilinearSystem:
    t: int
    ell: int
    r: int
    s: int
    H: int
    M: int
    eta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "eta", Fraction(self.eta))
        if not 3 <= self.ell <= self.t:
            raise ValueError("need 3 ≤ ℓ ≤ t")
        if min(self.r, self.s, self.H, self.M) < 1:
            raise ValueError("r, s, H and M must be positive")
        if self.H > self.M:
            raise ValueError("need H ≤ M")
        if self.eta <= 0:
            raise ValueError("η must be positive")

    @property
    def calK(self) -> AdmissibleIndexSet:
        return enumerate_calK(self.t, self.ell, self.r)

    def h_layout(self) -> list[tuple[int, tuple[int, ...]]]:
        """(l, (k_1..k_l)) for every shift variable, l = 1..r, in lexicographic order."""
        return [(l, k) for l in range(1, self.r + 1) for k in itertools.product(range(1, self.t + 1), repeat=l)]

    def u_vectors(self) -> list[tuple[int, ...]]:
        return list(itertools.product((0, 1), repeat=self.r))

    def blocks(self) -> list[tuple[int, tuple[tuple[int, ...], ...]]]:
        return [(j, k) for j in range(1, self.s + 1) for k in self.calK]

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "ell": self.ell,
            "r": self.r,
            "s": self.s,
            "H": self.H,
            "M": self.M,
            "eta": str(self.eta),
        }


def _coefficient_matrix(sys: MultilinearSystem, k, hvals: Mapping[tuple[int, tuple[int, ...]], int]) -> np.ndarray:
    """Rows u ∈ {0,1}^r, columns (i_1..i_r) ∈ [ℓ]^r: Π_l h_{l, k_{1i_1}..k_{li_l}}^{u_l}."""
    us = sys.u_vectors()
    cols = list(itertools.product(range(sys.ell), repeat=sys.r))
    A = np.ones((len(us), len(cols)), dtype=np.int64)
    for c, idx in enumerate(cols):
        hs = [hvals[(l, tuple(k[q][idx[q]] for q in range(l)))] for l in range(1, sys.r + 1)]
        for row, u in enumerate(us):
            A[row, c] = math.prod(hl for hl, ul in zip(hs, u) if ul)
    return A


def _all_sums(A: np.ndarray, M: int) -> np.ndarray:
    """Every A·m for m ∈ [±M]^cols, as an (n, rows) array."""
    ncols = A.shape[1]
    if ncols == 0:
        return np.zeros((1, A.shape[0]), dtype=np.int64)
    rng = np.arange(-M, M + 1, dtype=np.int64)
    grids = np.stack(np.meshgrid(*([rng] * ncols), indexing="ij"), axis=-1).reshape(-1, ncols)
    return grids @ A.T


def _encode(rows: np.ndarray, bound: np.ndarray) -> np.ndarray:
    """Injective int64 key for integer rows with |row_q| ≤ bound_q."""
    key = np.zeros(rows.shape[0], dtype=np.int64)
    for q in range(rows.shape[1]):
        key = key * (2 * int(bound[q]) + 1) + (rows[:, q] + int(bound[q]))
    return key


def _block_count(A: np.ndarray, M: int, n: np.ndarray) -> int:
    """#{m ∈ [±M]^cols : A m = n}, by meet-in-the-middle."""
    bound = np.abs(A).sum(axis=1) * M
    if np.any(np.abs(n) > bound):
        return 0
    half = A.shape[1] // 2
    left = _all_sums(A[:, :half], M)
    right = _all_sums(A[:, half:], M)
    lk = _encode(left, bound)
    rk = _encode(n[None, :] - right, bound)
    uniq, counts = np.unique(lk, return_counts=True)
    pos = np.searchsorted(uniq, rk)
    pos = np.clip(pos, 0, len(uniq) - 1)
    return int(counts[pos][uniq[pos] == rk].sum())


def _block_histogram(A: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """(keys, counts) of A m over all m ∈ [±M]^cols with keys from _encode."""
    bound = np.abs(A).sum(axis=1) * M
    sums = _all_sums(A, M)
    return np.unique(_encode(sums, bound), return_counts=True)


def _h_dict(sys: MultilinearSystem, flat: Sequence[int]) -> dict:
    return dict(zip(sys.h_layout(), (int(v) for v in flat)))


def _h_in_sets(sys: MultilinearSystem, flat: Sequence[int]) -> bool:
    pos = 0
    for l in range(1, sys.r + 1):
        width = sys.t**l
        if not in_calH(flat[pos : pos + width], l, sys.t, sys.eta, sys.H):
            return False
        pos += width
    return True


def _target_vector(sys: MultilinearSystem, targets: Mapping, j: int, k) -> np.ndarray:
    return np.array([int(targets.get((j, k, u), 0)) for u in sys.u_vectors()], dtype=np.int64)


def _unreachable(sys: MultilinearSystem, targets: Mapping) -> bool:
    cap = sys.ell**sys.r * sys.M
    return any(abs(int(n)) > cap * sys.H ** sum(u) for (_, _, u), n in targets.items())


@dataclass(frozen=True)
class SampleEstimate:
    value: float
    half_width: float
    samples: int


def _state_count(sys: MultilinearSystem) -> int:
    nh = len(sys.h_layout())
    return (2 * sys.H + 1) ** nh * sys.s * len(sys.calK) * sys.ell**sys.r * (2 * sys.M + 1)


def normalized_count(
    sys: MultilinearSystem,
    targets: Mapping,
    mode: str = "exact",
    seed: int = 0,
    n: int = 2000,
    max_states: int = DEFAULT_MAX_STATES,
) -> Fraction | SampleEstimate:
    """E_m E_h Π_l 1_{H_l}(h) Π_{j,k,u} 1(Σ_i h^u(i)·m_{jki} = n_{jku}).

    Targets are keyed by (j, k, u) with j 1-based, k an element of K and u in
    {0,1}^r; missing targets default to 0.  Exact mode enumerates every
    shift tuple; sample mode draws shift tuples uniformly and counts the m's
    exactly for each draw, returning the mean with a 95% half-width.
    """
    for key in targets:
        j, k, u = key
        if not 1 <= j <= sys.s or tuple(k) not in set(sys.calK) or len(u) != sys.r:
            raise ValueError(f"target key {key!r} does not index an equation")
    if _unreachable(sys, targets):
        return Fraction(0) if mode == "exact" else SampleEstimate(0.0, 0.0, 0)
    blocks = sys.blocks()
    layout = sys.h_layout()
    m_norm = (2 * sys.M + 1) ** (sys.ell**sys.r)

    def weight(flat) -> Fraction:
        if not _h_in_sets(sys, flat):
            return Fraction(0)
        hv = _h_dict(sys, flat)
        out = Fraction(1)
        for j, k in blocks:
            c = _block_count(_coefficient_matrix(sys, k, hv), sys.M, _target_vector(sys, targets, j, k))
            if c == 0:
                return Fraction(0)
            out *= Fraction(c, m_norm)
        return out

    if mode == "exact":
        states = _state_count(sys)
        if states > max_states:
            raise CapExceeded(f"{states} states exceed the cap {max_states}")
        total = Fraction(0)
        rng = range(-sys.H, sys.H + 1)
        for flat in itertools.product(rng, repeat=len(layout)):
            total += weight(flat)
        return total / (2 * sys.H + 1) ** len(layout)
    if mode == "sample":
        gen = np.random.default_rng(seed)
        draws = gen.integers(-sys.H, sys.H + 1, size=(n, len(layout)))
        vals = np.array([float(weight(row)) for row in draws])
        half = 1.96 * float(vals.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf
        return SampleEstimate(float(vals.mean()), half, n)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class MaxCount:
    value: Fraction | float
    targets: dict
    exact: bool


def max_normalized_count(
    sys: MultilinearSystem,
    mode: str = "exact",
    target_grid: Sequence[Mapping] | None = None,
    seed: int = 0,
    n: int = 2000,
    max_states: int = DEFAULT_MAX_STATES,
) -> MaxCount:
    """Maximum of normalized_count over targets.

    With a single equation block (s·|K| = 1) and exact mode the maximum is
    taken over all targets at once by summing the per-shift histograms.
    Otherwise the maximum is taken over ``target_grid`` (default: all
    targets zero).
    """
    blocks = sys.blocks()
    if mode == "exact" and len(blocks) == 1 and target_grid is None:
        states = _state_count(sys)
        if states > max_states:
            raise CapExceeded(f"{states} states exceed the cap {max_states}")
        (j, k), = blocks
        layout = sys.h_layout()
        acc: dict[int, int] = {}
        bound = None
        for flat in itertools.product(range(-sys.H, sys.H + 1), repeat=len(layout)):
            if not _h_in_sets(sys, flat):
                continue
            A = _coefficient_matrix(sys, k, _h_dict(sys, flat))
            # a common bound makes keys comparable across shift tuples
            bound = np.array([sys.ell**sys.r * sys.M * sys.H ** sum(u) for u in sys.u_vectors()])
            sums = _all_sums(A, sys.M)
            keys, counts = np.unique(_encode(sums, bound), return_counts=True)
            for key, c in zip(keys.tolist(), counts.tolist()):
                acc[key] = acc.get(key, 0) + c
        denom = (2 * sys.H + 1) ** len(layout) * (2 * sys.M + 1) ** (sys.ell**sys.r)
        if not acc:
            return MaxCount(Fraction(0), {(j, k, u): 0 for u in sys.u_vectors()}, True)
        best_key = max(acc, key=lambda kk: (acc[kk], -kk))
        return MaxCount(Fraction(acc[best_key], denom), _decode_targets(sys, j, k, best_key, bound), True)
    grid = list(target_grid) if target_grid is not None else [{}]
    best = None
    for tg in grid:
        val = normalized_count(sys, tg, mode=mode, seed=seed, n=n, max_states=max_states)
        score = val.value if isinstance(val, SampleEstimate) else val
        if best is None or score > best[0]:
            best = (score, dict(tg))
    return MaxCount(best[0], best[1], mode == "exact")


def _decode_targets(sys: MultilinearSystem, j: int, k, key: int, bound: np.ndarray) -> dict:
    vals = []
    for q in reversed(range(len(bound))):
        base = 2 * int(bound[q]) + 1
        vals.append(key % base - int(bound[q]))
        key //= base
    vals.reverse()
    return {(j, k, u): v for u, v in zip(sys.u_vectors(), vals)}


def prop74_bound(sys: MultilinearSystem) -> Fraction:
    """M^{−2^r s|K|}·H^{−r 2^{r−1} s|K|}."""
    sk = sys.s * len(sys.calK)
    return Fraction(1, sys.M ** (2**sys.r * sk) * sys.H ** (sys.r * 2 ** (sys.r - 1) * sk))


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class LinearSweepRow:
    h: tuple[int, ...]
    M: int
    count: int
    bound: Fraction

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.count) / self.bound


def linear_sweep(ells: Iterable[int], hmax: int, Ms: Iterable[int], positive_only: bool = False) -> list[LinearSweepRow]:
    """max_t count / rhs for every ordered h ∈ ([±hmax] \\ {0})^ℓ and M, in deterministic order."""
    vals = list(range(1, hmax + 1)) if positive_only else [v for v in range(-hmax, hmax + 1) if v]
    Ms = list(Ms)
    rows = []
    cache: dict[tuple, int] = {}
    for ell in ells:
        for h in itertools.product(vals, repeat=ell):
            key0 = tuple(sorted(abs(x) for x in h))
            for M in Ms:
                key = (key0, M)
                if key not in cache:
                    cache[key] = max_linear_solutions(key0, M)
                rows.append(LinearSweepRow(h, M, cache[key], linear_bound_rhs(h, M)))
    return rows
