import numpy as np
import pytest

from pklab.measure import MarginalSpec, build_gauss_hermite, build_product
from pklab.polyfield import Polynomial, VectorField

DELTAS = (0.002, 0.004, 0.008)

# Regression values of cpk - 1 for hermite6(delta) x hermite6(delta) at degree 4,
# cross-checked against scipy.linalg.eigh on the same Gram pair.
CPK_MINUS_ONE = {
    0.002: 0.01419368139684,
    0.004: 0.06309527423547,
    0.008: 0.24600825079630,
}


def h6_product(delta, n=2, m=10):
    return build_product([MarginalSpec.hermite6(delta)] * n, m)


def measure_suite(m=10):
    """Measures satisfying the moment assumption, keyed by a short label."""
    return {
        "gauss2": build_gauss_hermite(2, m),
        "gauss3": build_gauss_hermite(3, m),
        "h6_0.002": h6_product(0.002, 2, m),
        "h6_0.004": h6_product(0.004, 2, m),
        "h6_0.008": h6_product(0.008, 2, m),
        "h6_0.008_n3": h6_product(0.008, 3, m),
        "mixed": build_product([MarginalSpec.hermite6(0.005), MarginalSpec.standard_normal()], m),
    }


def random_polynomial(rng, n, degree, density=0.6):
    terms = {}
    for total in range(degree + 1):
        for e in _exponents(n, total):
            if rng.random() < density:
                terms[e] = float(rng.normal())
    return Polynomial(n, terms)


def _exponents(n, total):
    if n == 1:
        yield (total,)
        return
    for k in range(total, -1, -1):
        for rest in _exponents(n - 1, total - k):
            yield (k,) + rest


def field_suite(n=2, count=50, degree=4, seed=20240611):
    """Seeded random polynomial vector fields of degree <= `degree`."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        d = 1 + len(out) % degree
        u = VectorField(tuple(random_polynomial(rng, n, d) for _ in range(n)))
        if u.degree >= 1:
            out.append(u)
    return out


@pytest.fixture(scope="session")
def suite():
    return measure_suite()


@pytest.fixture(scope="session")
def fields2():
    return field_suite(2)
