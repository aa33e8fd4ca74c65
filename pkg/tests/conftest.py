import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from petbox.lattice import IntMultiset
from petbox.norms import LatticeFunction
from petbox.polyalg import VectorPolynomial

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


def vectors(dim, lo=-3, hi=3):
    return st.tuples(*[st.integers(lo, hi)] * dim)


def multisets(dim, max_points=5, radius=3, max_mult=3):
    return st.dictionaries(vectors(dim, -radius, radius), st.integers(1, max_mult), min_size=1, max_size=max_points).map(
        lambda d: IntMultiset(d, dim)
    )


@st.composite
def z_polynomials(draw, dim, max_deg=3, coeff=3, allow_constant=False):
    """Polynomials in z alone with Z^dim coefficients."""
    lo = 0 if allow_constant else 1
    terms = {}
    for i in range(lo, max_deg + 1):
        c = draw(vectors(dim, -coeff, coeff))
        if any(c):
            terms[(i, ())] = c
    return VectorPolynomial(terms, dim)


@st.composite
def zh_polynomials(draw, dim, num_h, max_z=3, max_h=2, coeff=3, max_terms=5):
    n = draw(st.integers(0, max_terms))
    terms = []
    for _ in range(n):
        ze = draw(st.integers(0, max_z))
        he = tuple(draw(st.integers(0, max_h)) for _ in range(num_h))
        terms.append(((ze, he), draw(vectors(dim, -coeff, coeff))))
    return VectorPolynomial(terms, dim, num_h)


@st.composite
def lattice_functions(draw, dim, max_side=6, kind="bounded"):
    shape = tuple(draw(st.integers(1, max_side)) for _ in range(dim))
    origin = tuple(draw(st.integers(-3, 3)) for _ in range(dim))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    size = int(np.prod(shape))
    if kind == "pm1":
        vals = rng.choice([-1.0, 1.0], size=size)
    else:
        r = np.sqrt(rng.uniform(0, 1, size))
        vals = r * np.exp(2j * np.pi * rng.uniform(0, 1, size))
    return LatticeFunction(origin, vals.reshape(shape))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str, elapsed: float) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {elapsed:7.2f}s  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
