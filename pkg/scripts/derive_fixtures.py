"""Derive the oracle constants stored in src/petbox/data/fixtures.json.

Every constant is computed by brute-force enumeration that shares no code
with the package, so the package's own counters are checked against them.
"""

import itertools
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "petbox" / "data" / "fixtures.json"


def max_count_bruteforce(h, M):
    """max over targets of #{m ∈ [±M]^ℓ : Σ h_i m_i = target}, by full meshgrid enumeration."""
    rng = np.arange(-M, M + 1)
    grids = np.meshgrid(*([rng] * len(h)), indexing="ij")
    sums = sum(hi * g for hi, g in zip(h, grids)).ravel()
    _, counts = np.unique(sums, return_counts=True)
    return int(counts.max())


def max_count_pairs(h, M):
    """Same quantity for ℓ = 4: pair-sum tables by bincount, joined by a dense convolution."""
    rng = np.arange(-M, M + 1)
    a, b = np.meshgrid(rng, rng, indexing="ij")
    tables = []
    for x, y in ((h[0], h[1]), (h[2], h[3])):
        s = (x * a + y * b).ravel()
        tables.append(np.bincount(s - s.min()))
    return int(np.convolve(tables[0], tables[1]).max())


def rhs(h, M):
    ell = len(h)
    return Fraction(M) ** (ell - 1) * Fraction(math.gcd(*h), abs(h[-1])) + Fraction(M) ** (ell - 2)


def linear_constant(ell, hmax, Mmax, counter):
    # the count depends only on the multiset of |h_i|; the bound on which entry comes last
    worst = Fraction(0)
    for ms in itertools.combinations_with_replacement(range(1, hmax + 1), ell):
        for M in range(1, Mmax + 1):
            c = counter(ms, M)
            for i in range(ell):
                order = ms[:i] + ms[i + 1 :] + (ms[i],)
                worst = max(worst, Fraction(c) / rhs(order, M))
    return worst


def outside_H1(values, eta, H):
    n = len(values)
    for a, c in itertools.permutations(range(n), 2):
        if abs(values[a] - values[c]) < eta * H:
            return True
    for a, b, c in itertools.permutations(range(n), 3):
        g = math.gcd(values[a] - values[c], values[b] - values[c])
        if g == 0 or g > 1 / eta:
            return True
    return False


def density_fractions(t, H, etas):
    out = {}
    for eta in etas:
        bad = sum(outside_H1(v, eta, H) for v in itertools.product(range(-H, H + 1), repeat=t))
        out[str(eta)] = Fraction(bad, (2 * H + 1) ** t)
    return out


def prop74_max(H, M, eta, ell=3):
    """max over (n0, n1) of E_h 1_H(h) E_m 1(Σ m = n0) 1(Σ h m = n1) for t = ℓ = 3, r = s = 1."""
    hist = {}
    rng = range(-M, M + 1)
    ms = list(itertools.product(rng, repeat=ell))
    for h in itertools.product(range(-H, H + 1), repeat=ell):
        if outside_H1(h, eta, H):
            continue
        for m in ms:
            key = (sum(m), sum(a * b for a, b in zip(h, m)))
            hist[key] = hist.get(key, 0) + 1
    if not hist:
        return Fraction(0)
    return Fraction(max(hist.values()), (2 * H + 1) ** ell * (2 * M + 1) ** ell)


def main():
    fixtures = {}
    lin = {}
    for ell in (1, 2, 3):
        lin[str(ell)] = str(linear_constant(ell, 10, 10, max_count_bruteforce))
    fixtures["linear_bound"] = {"grid": {"ells": [1, 2, 3], "hmax": 10, "Mmax": 10}, "C": lin}
    wide = {}
    for ell in (1, 2, 3):
        wide[str(ell)] = str(linear_constant(ell, 12, 12, max_count_bruteforce))
    wide["4"] = str(linear_constant(4, 12, 12, max_count_pairs))
    fixtures["linear_bound_wide"] = {"grid": {"ells": [1, 2, 3, 4], "hmax": 12, "Mmax": 12}, "C": wide}
    print("linear done", file=sys.stderr)

    etas = [Fraction(1, 20), Fraction(1, 10), Fraction(1, 5)]
    fr = density_fractions(3, 20, etas)
    C = max(fr[str(e)] / e for e in etas)
    fixtures["calH_density"] = {
        "l": 1,
        "t": 3,
        "H": 20,
        "fractions": {k: str(v) for k, v in fr.items()},
        "C": str(C),
    }
    print("density done", file=sys.stderr)

    E = 2
    points = []
    worst = Fraction(0)
    for H in (2, 3, 4):
        for eta in (Fraction(1, 4), Fraction(1, 2)):
            val = prop74_max(H, H, eta)
            ratio = val * H**2 * H * eta**E
            worst = max(worst, ratio)
            points.append({"H": H, "M": H, "eta": str(eta), "max_count": str(val)})
    fixtures["prop74"] = {"t": 3, "ell": 3, "r": 1, "s": 1, "E": E, "C": str(worst), "points": points}
    fixtures["theorem15"] = {"threshold": 0.9}
    OUT.write_text(json.dumps(fixtures, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(fixtures, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
