"""Conversions between monomial and tensor Hermite (He_alpha) coefficients."""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from numpy.polynomial import hermite_e

from .polyfield import Polynomial


@lru_cache(maxsize=None)
def _he_to_mono(k):
    c = np.zeros(k + 1)
    c[k] = 1.0
    return tuple(hermite_e.herme2poly(c))


@lru_cache(maxsize=None)
def _mono_to_he(k):
    c = np.zeros(k + 1)
    c[k] = 1.0
    return tuple(hermite_e.poly2herme(c))


def multi_indices(n, degree):
    """All alpha in N^n with |alpha| == degree, in lexicographic descending order."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), degree):
        alpha = [0] * n
        for k in combo:
            alpha[k] += 1
        out.append(tuple(alpha))
    return out


def hermite_poly(alpha) -> Polynomial:
    """He_alpha(x) = prod_k He_{alpha_k}(x_k) as a monomial-basis polynomial."""
    n = len(alpha)
    terms = {(0,) * n: 1.0}
    for k, a in enumerate(alpha):
        new = {}
        for e, c in terms.items():
            for p, h in enumerate(_he_to_mono(a)):
                if h == 0.0:
                    continue
                f = list(e)
                f[k] = p
                new[tuple(f)] = new.get(tuple(f), 0.0) + c * h
        terms = new
    return Polynomial(n, terms)


def to_hermite(p: Polynomial) -> dict:
    """Coefficients {alpha: c} with p = sum_alpha c He_alpha."""
    out = {}
    for e, c in p.items():
        partial = {(): c}
        for a in e:
            new = {}
            for beta, v in partial.items():
                for b, h in enumerate(_mono_to_he(a)):
                    if h != 0.0:
                        key = beta + (b,)
                        new[key] = new.get(key, 0.0) + v * h
            partial = new
        for beta, v in partial.items():
            out[beta] = out.get(beta, 0.0) + v
    return {a: v for a, v in out.items() if v != 0.0}


def from_hermite(coeffs: dict, n: int) -> Polynomial:
    out = Polynomial.zero(n)
    for alpha, c in sorted(coeffs.items()):
        out = out + c * hermite_poly(alpha)
    return out


def gaussian_mean(p: Polynomial) -> float:
    """Exact integral of p against the standard Gaussian."""
    return to_hermite(p).get((0,) * p.dim, 0.0)
