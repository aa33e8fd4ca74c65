"""The PET induction engine.

Starting from a progression x, x + P_1(z), …, x + P_ℓ(z), the engine repeatedly
applies the van der Corput operation ∂_m to the polynomial family until every
member is linear in z, tracking a colexicographic complexity measure (the
family type) that must strictly decrease at each step.  From the final linear
family b_1(h)z, …, b_s(h)z it reads off the direction polynomials
C_1 = b_1 and C_j = b_1 − b_j.

Indices m are 1-based, matching the usual mathematical labelling of
families.  Function indices run over 0..ℓ with P_0 = 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

from .lattice import CapExceeded, GenArithProgression, Vec, is_zero, vscale, vsub, zero
from .polyalg import (
    MINUS_INFINITY,
    VectorPolynomial,
    coeff_in_z,
    deg_z,
    h_monomials,
    is_multilinear,
    is_z_free,
    leading_coeff_z,
    multinomial,
    poly_sub,
    promote_numH,
    render,
    sigma_shift,
    strip_constant,
    substitute_z_shift,
    vanishes_at_zero,
)

DEFAULT_STEP_CAP = 10_000
# family sizes grow geometrically per step; past this the run is not desk scale
DEFAULT_MEMBER_CAP = 20_000


class DegenerateFamily(ValueError):
    """Some pair of polynomials (with P_0 = 0) differs by a constant."""


@dataclass(frozen=True)
class PolynomialFamily:
    members: tuple[VectorPolynomial, ...]
    dim: int
    num_h: int

    @classmethod
    def of(cls, members: Sequence[VectorPolynomial]) -> "PolynomialFamily":
        if not members:
            raise ValueError("empty family")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise ValueError("members have different dimensions")
        r = max(m.num_h for m in members)
        return cls(tuple(promote_numH(m, r) for m in members), dims.pop(), r)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, j: int) -> VectorPolynomial:
        """1-based access."""
        if not 1 <= j <= len(self.members):
            raise IndexError(f"family index {j} outside 1..{len(self.members)}")
        return self.members[j - 1]

    def max_degree(self) -> int:
        return max(deg_z(m) for m in self.members)

    def is_linear(self) -> bool:
        return all(deg_z(m) <= 1 for m in self.members)

    def render(self) -> list[str]:
        return [render(m) for m in self.members]


@dataclass(frozen=True)
class NormalCheck:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def is_normal(Q: PolynomialFamily) -> NormalCheck:
    """Nonzero, pairwise distinct, first member of maximal z-degree, all vanishing at z = 0."""
    for j, q in enumerate(Q.members, start=1):
        if q.is_zero():
            return NormalCheck(False, f"member {j} is zero")
        if not vanishes_at_zero(q):
            return NormalCheck(False, f"member {j} does not vanish at z = 0")
    if len(set(Q.members)) != len(Q.members):
        return NormalCheck(False, "members are not pairwise distinct")
    if deg_z(Q.members[0]) < Q.max_degree():
        return NormalCheck(False, "first member does not have maximal degree")
    return NormalCheck(True)


@dataclass(frozen=True, order=False)
class FamilyType:
    """(w_1, …, w_d'): number of distinct leading coefficients among degree-l members."""

    counts: tuple[int, ...]

    def _key(self, length: int) -> tuple[int, ...]:
        padded = self.counts + (0,) * (length - len(self.counts))
        return tuple(reversed(padded))

    def __lt__(self, other: "FamilyType") -> bool:
        n = max(len(self.counts), len(other.counts))
        return self._key(n) < other._key(n)

    def __le__(self, other: "FamilyType") -> bool:
        return self < other or self.same(other)

    def same(self, other: "FamilyType") -> bool:
        n = max(len(self.counts), len(other.counts))
        return self._key(n) == other._key(n)


def family_type(Q: PolynomialFamily) -> FamilyType:
    check = is_normal(Q)
    if not check:
        raise ValueError(f"family type needs a normal family: {check.reason}")
    d = Q.max_degree()
    leads: list[set[VectorPolynomial]] = [set() for _ in range(d)]
    for q in Q.members:
        leads[deg_z(q) - 1].add(leading_coeff_z(q))
    return FamilyType(tuple(len(s) for s in leads))


def vdc_op(Q: PolynomialFamily, m: int) -> PolynomialFamily:
    """∂_m Q = (σQ_1 − Q_m, …, σQ_s − Q_m, Q_1 − Q_m, …, Q_s − Q_m)^*, with h_{r+1} appended."""
    if not 1 <= m <= len(Q):
        raise IndexError(f"m = {m} outside 1..{len(Q)}")
    r = Q.num_h
    qm = promote_numH(Q[m], r + 1)
    raw = [poly_sub(sigma_shift(q), qm) for q in Q.members]
    raw += [poly_sub(promote_numH(q, r + 1), qm) for q in Q.members]
    seen: set[VectorPolynomial] = set()
    out = []
    for p in raw:
        if p.is_zero() or p in seen:
            continue
        seen.add(p)
        out.append(p)
    if not out:
        raise ValueError("van der Corput operation produced an empty family")
    return PolynomialFamily(tuple(out), Q.dim, r + 1)


def choose_m(Q: PolynomialFamily) -> int:
    """Deterministic choice of the index to subtract (smallest valid index on ties)."""
    if Q.is_linear():
        raise ValueError("family is already linear in z")
    w = family_type(Q).counts
    d = len(w)
    low = next(l for l in range(1, d + 1) if w[l - 1])
    if low < d:
        return next(j for j, q in enumerate(Q.members, start=1) if deg_z(q) == low)
    if w[d - 1] > 1:
        lead1 = leading_coeff_z(Q.members[0])
        return next(
            j
            for j, q in enumerate(Q.members, start=1)
            if deg_z(q) == d and leading_coeff_z(q) != lead1
        )
    return 1


# ---------------------------------------------------------------------------
# normalization of a progression


@dataclass(frozen=True)
class Normalization:
    """How an input progression was turned into a normal family.

    ``labels[i]`` is the function index (0..ℓ) evaluated at x + family[i+1](z);
    ``base`` is the function index evaluated at x itself; ``constants`` are
    the stripped constant terms P_j(0) indexed by j − 1.
    """

    family: PolynomialFamily
    labels: tuple[int, ...]
    base: int
    target: int
    constants: tuple[Vec, ...]


def _check_essentially_distinct(P: Sequence[VectorPolynomial]) -> None:
    padded = [VectorPolynomial.zero(P[0].dim)] + list(P)
    for i, j in itertools.combinations(range(len(padded)), 2):
        diff = poly_sub(padded[j], padded[i])
        if deg_z(diff) == MINUS_INFINITY or deg_z(diff) < 1:
            raise DegenerateFamily(f"P_{j} − P_{i} is constant in z")


def normalize_progression(P: Sequence[VectorPolynomial], target: int = 1) -> Normalization:
    """Strip constants and arrange the family so the target function sits first with maximal degree.

    With ``target = 1`` and P_1 of maximal degree this is the identity (up to
    constants).  When the target polynomial lacks maximal degree, or the
    target is f_0, the progression is translated by the first maximal-degree
    P_m: every P_j becomes P_j − P_m and the slot of P_m is taken by −P_m,
    which now carries f_0.
    """
    if not P:
        raise ValueError("empty progression")
    for p in P:
        if p.num_h:
            raise ValueError("progression polynomials must be in z alone")
    ell = len(P)
    if not 0 <= target <= ell:
        raise IndexError(f"target {target} outside 0..{ell}")
    _check_essentially_distinct(P)
    constants = tuple(coeff_in_z(p, 0).terms.get((0, ()), zero(p.dim)) for p in P)
    R = [VectorPolynomial.zero(P[0].dim)] + [strip_constant(p) for p in P]
    d = max(deg_z(p) for p in R[1:])
    if target != 0 and deg_z(R[target]) == d:
        base = 0
        shifted = R
    else:
        base = next(j for j in range(1, ell + 1) if deg_z(R[j]) == d)
        shifted = [poly_sub(p, R[base]) for p in R]
    # slots 1..ℓ; slot `base` (if nonzero) now holds function 0
    slots = []
    for j in range(1, ell + 1):
        if j == base:
            slots.append((0, shifted[0]))
        else:
            slots.append((j, shifted[j]))
    first = next(i for i, (lab, _) in enumerate(slots) if lab == target)
    order = [slots[first]] + [s for i, s in enumerate(slots) if i != first]
    family = PolynomialFamily.of([p for _, p in order])
    check = is_normal(family)
    if not check:
        raise DegenerateFamily(f"normalized family is not normal: {check.reason}")
    return Normalization(family, tuple(lab for lab, _ in order), base, target, constants)


# ---------------------------------------------------------------------------
# the PET loop


@dataclass(frozen=True)
class PetStep:
    before: PolynomialFamily
    m: int
    after: PolynomialFamily
    type_before: FamilyType


@dataclass(frozen=True)
class PetTrace:
    normalization: Normalization | None
    initial: PolynomialFamily
    steps: tuple[PetStep, ...]
    final: PolynomialFamily
    directions: tuple[VectorPolynomial, ...]

    @property
    def num_h_final(self) -> int:
        return self.final.num_h

    def families(self) -> list[PolynomialFamily]:
        return [self.initial] + [s.after for s in self.steps]

    def log(self) -> list[str]:
        lines = []
        for i, st in enumerate(self.steps, start=1):
            lines.append(f"step {i}: type {st.type_before.counts} m={st.m} -> {len(st.after)} members")
        return lines

    def to_json(self) -> dict:
        norm = self.normalization
        return {
            "target": norm.target if norm else None,
            "labels": list(norm.labels) if norm else None,
            "base": norm.base if norm else None,
            "initial": self.initial.render(),
            "steps": [
                {"type": list(st.type_before.counts), "m": st.m, "family": st.after.render()}
                for st in self.steps
            ],
            "num_h": self.num_h_final,
            "directions": [render(c) for c in self.directions],
        }


def pet_reduce(
    Q: PolynomialFamily, step_cap: int = DEFAULT_STEP_CAP, member_cap: int = DEFAULT_MEMBER_CAP
) -> tuple[list[PetStep], PolynomialFamily]:
    """Apply (family_type, choose_m, vdc_op) until the family is linear in z.

    Raises CapExceeded when an intermediate family outgrows ``member_cap``.
    """
    check = is_normal(Q)
    if not check:
        raise ValueError(f"PET needs a normal family: {check.reason}")
    steps: list[PetStep] = []
    while not Q.is_linear():
        if len(steps) >= step_cap:
            raise RuntimeError(f"PET did not terminate within {step_cap} steps")
        t = family_type(Q)
        m = choose_m(Q)
        if 2 * len(Q) > member_cap:
            raise CapExceeded(f"next family could reach {2 * len(Q)} members (cap {member_cap})")
        nxt = vdc_op(Q, m)
        check = is_normal(nxt)
        if not check:
            raise RuntimeError(f"van der Corput step lost normality: {check.reason}")
        if not family_type(nxt) < t:
            raise RuntimeError(f"type did not decrease: {t.counts} -> {family_type(nxt).counts}")
        steps.append(PetStep(Q, m, nxt, t))
        Q = nxt
    return steps, Q


def directions_from_linear(Q: PolynomialFamily) -> tuple[VectorPolynomial, ...]:
    """C_1 = b_1 and C_j = b_1 − b_j for the linear family b_1(h)z, …, b_s(h)z."""
    if not Q.is_linear():
        raise ValueError("family is not linear in z")
    b = [coeff_in_z(q, 1) for q in Q.members]
    return tuple([b[0]] + [poly_sub(b[0], bj) for bj in b[1:]])


def pet_run(
    P: Sequence[VectorPolynomial],
    target: int = 1,
    step_cap: int = DEFAULT_STEP_CAP,
    member_cap: int = DEFAULT_MEMBER_CAP,
) -> PetTrace:
    norm = normalize_progression(P, target)
    steps, final = pet_reduce(norm.family, step_cap, member_cap)
    dirs = directions_from_linear(final)
    return PetTrace(norm, norm.family, tuple(steps), final, dirs)


def pet_run_family(
    Q: PolynomialFamily, step_cap: int = DEFAULT_STEP_CAP, member_cap: int = DEFAULT_MEMBER_CAP
) -> PetTrace:
    """PET on an already normal family (possibly with h-variables), e.g. a cube family."""
    steps, final = pet_reduce(Q, step_cap, member_cap)
    return PetTrace(None, Q, tuple(steps), final, directions_from_linear(final))


def canonical_set(polys: Sequence[VectorPolynomial]) -> tuple[VectorPolynomial, ...]:
    """Order-insensitive canonical form of a collection of polynomials."""
    return tuple(sorted(set(polys), key=lambda p: p.sort_key()))


def relabel_h(P: VectorPolynomial, perm: Sequence[int]) -> VectorPolynomial:
    """Rename h_i as h_{perm[i-1]} (1-based permutation of 1..r)."""
    if sorted(perm) != list(range(1, P.num_h + 1)):
        raise ValueError("not a permutation of the h-variables")
    out = []
    for (ze, he), c in P.terms.items():
        new = [0] * P.num_h
        for i, e in enumerate(he):
            new[perm[i] - 1] = e
        out.append(((ze, tuple(new)), c))
    return VectorPolynomial(out, P.dim, P.num_h)


# ---------------------------------------------------------------------------
# descendence verification


@dataclass
class DescendenceReport:
    violations: list[str] = field(default_factory=list)
    families_checked: int = 0
    directions_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def _betas(family: PolynomialFamily) -> list[dict[int, Vec]]:
    """β_{w,k} for w = 0..ℓ (w = 0 is the zero polynomial) of a z-only family."""
    out: list[dict[int, Vec]] = [{}]
    for p in family.members:
        out.append({ze: c for (ze, _), c in p.terms.items()})
    return out


def _leading_candidates(family: PolynomialFamily) -> dict[int, set[Vec]]:
    """k ↦ {β_{1k} − β_{wk} : deg(P_1 − P_w) = k}, the admissible leading coefficients."""
    beta = _betas(family)
    dimz = zero(family.dim)
    cands: dict[int, set[Vec]] = {}
    for w in range(len(beta)):
        if w == 1:
            continue
        diff = {k: vsub(beta[1].get(k, dimz), beta[w].get(k, dimz)) for k in set(beta[1]) | set(beta[w])}
        nz = [k for k, v in diff.items() if not is_zero(v)]
        if nz:
            k = max(nz)
            cands.setdefault(k, set()).add(diff[k])
    return cands


def _gamma_form_violations(Q: PolynomialFamily, beta: list[dict[int, Vec]], d: int) -> list[str]:
    """Check Q_j = Σ_{i,u} multinomial(u,i)·(β_{w_ju,|u|+i} − β_{w_u,|u|+i}) h^u z^i with w_1u = 1."""
    out = []
    dimz = zero(Q.dim)
    by_u: dict[tuple[int, ...], dict[int, dict[int, Vec]]] = {}
    for j, q in enumerate(Q.members, start=1):
        for (ze, he), c in q.terms.items():
            if ze + sum(he) > d:
                out.append(f"member {j} has monomial z^{ze}h^{he} of total degree above {d}")
            by_u.setdefault(he, {}).setdefault(j, {})[ze] = c
    ell = len(beta) - 1

    def b(w: int, k: int) -> Vec:
        return beta[w].get(k, dimz)

    for u, per_j in by_u.items():
        size = sum(u)
        irange = range(1, d - size + 1)
        mult = [multinomial(u, i) for i in irange]
        # want[wu][w]: the coefficient tuple over i of multinomial(u,i)·(β_{w,|u|+i} − β_{wu,|u|+i})
        want = [
            [tuple(vscale(c, vsub(b(w, size + i), b(wu, size + i))) for c, i in zip(mult, irange)) for w in range(ell + 1)]
            for wu in range(ell + 1)
        ]
        sig = {j: tuple(per_j.get(j, {}).get(i, dimz) for i in irange) for j in range(1, len(Q) + 1)}
        ok = False
        for wu in range(ell + 1):
            if sig[1] != want[wu][1]:
                continue
            allowed = set(want[wu])
            if all(sig[j] in allowed for j in range(2, len(Q) + 1)):
                ok = True
                break
        if not ok:
            out.append(f"h-monomial {u}: coefficients are not of the descendent form")
    return out


def _leading_violations(Q: PolynomialFamily, cands: dict[int, set[Vec]], label: str) -> list[str]:
    out = []
    zero_poly = VectorPolynomial.zero(Q.dim, Q.num_h)
    q1 = Q.members[0]
    for j, qj in [(0, zero_poly)] + list(enumerate(Q.members, start=1))[1:]:
        diff = poly_sub(q1, qj)
        lead = leading_coeff_z(diff)
        d1j = deg_z(diff)
        if not is_multilinear(lead):
            out.append(f"{label}: leading coefficient of Q_1 − Q_{j} is not multilinear")
            continue
        for u, c in h_monomials(lead).items():
            k = sum(u) + d1j
            scale = math.factorial(k) // math.factorial(d1j)
            if not any(vscale(scale, v) == c for v in cands.get(k, ())):
                out.append(f"{label}: coefficient {c} of h^{u} in lead(Q_1 − Q_{j}) is not {scale}·(leading coefficient)")
    return out


def verify_descendence(trace: PetTrace, P: Sequence[VectorPolynomial] | None = None) -> DescendenceReport:
    """Check every family of the trace and the final directions against the original progression."""
    report = DescendenceReport()
    if P is not None and trace.normalization is not None:
        again = normalize_progression(P, trace.normalization.target)
        if again.family != trace.initial:
            report.violations.append("trace does not start from the normalized progression")
    base = trace.initial
    if base.num_h:
        raise ValueError("descendence is checked against a family in z alone")
    cands = _leading_candidates(base)
    beta = _betas(base)
    d = base.max_degree()
    for idx, Q in enumerate(trace.families()):
        label = f"family {idx}"
        check = is_normal(Q)
        if not check:
            report.violations.append(f"{label}: not normal ({check.reason})")
            continue
        report.violations += _leading_violations(Q, cands, label)
        report.violations += [f"{label}: {v}" for v in _gamma_form_violations(Q, beta, d)]
        report.families_checked += 1
    for j, C in enumerate(trace.directions, start=1):
        report.directions_checked += 1
        if C.is_zero():
            report.violations.append(f"direction {j} is zero")
            continue
        if not is_z_free(C) or not is_multilinear(C):
            report.violations.append(f"direction {j} is not a multilinear polynomial in h")
            continue
        for u, c in h_monomials(C).items():
            k = sum(u) + 1
            if not any(vscale(math.factorial(k), v) == c for v in cands.get(k, ())):
                report.violations.append(f"direction {j}: coefficient {c} of h^{u} is not {k}!·(leading coefficient of some P_1 − P_w)")
    if len(set(trace.directions)) != len(trace.directions):
        report.violations.append("directions are not pairwise distinct")
    return report


# ---------------------------------------------------------------------------
# cube family


def build_cube_family(P: VectorPolynomial, r: int) -> PolynomialFamily:
    """{P(z + ε·h) − P(ε·h) : ε ∈ {0,1}^r}, ordered with ε = (1,…,1) first."""
    if P.num_h:
        raise ValueError("expected a polynomial in z alone")
    if r < 1:
        raise ValueError("r must be positive")
    d = deg_z(P)
    if d == MINUS_INFINITY or d < 2:
        raise ValueError("the cube family needs degree at least 2")
    eps_list = list(itertools.product((1, 0), repeat=r))
    members = []
    for eps in eps_list:
        shifted = substitute_z_shift(P, [i for i, e in enumerate(eps) if e], r)
        members.append(strip_constant(shifted))
    Q = PolynomialFamily(tuple(members), P.dim, r)
    check = is_normal(Q)
    if not check:
        raise RuntimeError(f"cube family is not normal: {check.reason}")
    beta_d = P.terms[(d, ())]
    for (a, qa), (b, qb) in itertools.combinations(zip(eps_list, members), 2):
        diff = poly_sub(qa, qb)
        expect = VectorPolynomial(
            [((0, tuple(1 if k == i else 0 for k in range(r))), vscale(d * (a[i] - b[i]), beta_d)) for i in range(r)],
            P.dim,
            r,
        )
        if deg_z(diff) != d - 1 or leading_coeff_z(diff) != expect:
            raise RuntimeError(f"unexpected leading coefficient for ε = {a}, ε' = {b}")
    return Q


# ---------------------------------------------------------------------------
# target boxes


def theorem_target_boxes(P: Sequence[VectorPolynomial], j: int, K: int) -> list[GenArithProgression]:
    """For each j' ≠ j in [0, ℓ] (P_0 = 0): (β_{j,d} − β_{j',d})·[±K^d] with d = deg(P_j − P_{j'})."""
    if K < 1:
        raise ValueError("K must be positive")
    ell = len(P)
    if not 0 <= j <= ell:
        raise IndexError(f"index {j} outside 0..{ell}")
    R = [VectorPolynomial.zero(P[0].dim)] + list(P)
    out = []
    for jp in range(ell + 1):
        if jp == j:
            continue
        diff = poly_sub(R[j], R[jp])
        d = deg_z(diff)
        if d == MINUS_INFINITY or d < 1:
            raise DegenerateFamily(f"P_{j} − P_{jp} is constant in z")
        out.append(GenArithProgression([(diff.terms[(d, ())], K**d)]))
    return out


def concatenation_target_boxes(C: VectorPolynomial, H: int, M: int | None = None) -> GenArithProgression:
    """Σ_u γ_u·[±H^{|u|}·M] over the monomials of a multilinear C (M defaults to H)."""
    if not is_z_free(C) or not is_multilinear(C):
        raise ValueError("expected a multilinear polynomial in h")
    if C.is_zero():
        raise ValueError("the zero polynomial spans no progression")
    if M is None:
        M = H
    mons = sorted(h_monomials(C).items(), key=lambda kv: (-sum(kv[0]), tuple(-e for e in kv[0])))
    return GenArithProgression([(c, H ** sum(u) * M) for u, c in mons])
