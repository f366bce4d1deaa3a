"""Galerkin lower bounds on the Poincare-Korn constant.

The trial space is spanned by vector Hermite fields e_k He_alpha with
1 <= |alpha| <= degree, each centered and stripped of its antisymmetric
part.  Restricted to that span the constant is the top eigenvalue of the
pencil M w = lam (2K) w, with M the L2 Gram and K the Dirichlet Gram of the
symmetrized gradients.  Since the span sits inside the admissible class,
the eigenvalue is a lower bound on the true constant.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import ConditioningError, HypothesisError, PreconditionError, QuadratureExactnessWarning
from .hermite import hermite_poly, multi_indices
from .linalg import generalized_eigh
from .measure import DEFAULT_MOMENT_TOL, QuadratureMeasure, check_moments
from .polyfield import (
    Polynomial,
    VectorField,
    antisym_projection,
    evaluate_fields,
    evaluate_sym_grads,
)

KERNEL_TOL = 1e-12
TIE_TOL = 1e-10


@dataclass(frozen=True)
class BasisSet:
    fields: Tuple[VectorField, ...]
    degree: int
    dim: int
    labels: Tuple[tuple, ...] = ()

    def __len__(self):
        return len(self.fields)

    def combine(self, coeffs) -> VectorField:
        out = VectorField.zero(self.dim)
        for c, f in zip(coeffs, self.fields):
            if c != 0.0:
                out = out + f * float(c)
        return out


@dataclass(frozen=True, eq=False)
class GramPair:
    M: np.ndarray
    K: np.ndarray


@dataclass(frozen=True, eq=False)
class CpkEstimate:
    value: float
    degree: int
    basis_size: int
    witness: VectorField
    coeffs: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    multiplicity: int = 1


def _warn(msg):
    warnings.warn(msg, QuadratureExactnessWarning, stacklevel=3)


def _require_moments(mu, tol):
    report = check_moments(mu, tol)
    if not report.passes:
        raise HypothesisError(
            "measure fails the moment assumption "
            f"(centered {report.centered_residual:.3g}, isotropy {report.isotropy_residual:.3g}, "
            f"third {report.third_moment_residual:.3g}, fourth {report.fourth_moment_residual:.3g})"
        )
    return report


def _raw_fields(n, degree):
    fields, labels = [], []
    for d in range(1, degree + 1):
        for alpha in multi_indices(n, d):
            h = hermite_poly(alpha)
            for k in range(n):
                comps = [Polynomial.zero(n)] * n
                comps[k] = h
                fields.append(VectorField(tuple(comps)))
                labels.append((k, alpha))
    return fields, labels


def _normalize_field(u, mu, tol):
    """Remove the mean and the antisymmetric linear part of u."""
    mean = mu.integrate(u.evaluate(mu.nodes))
    A = antisym_projection(u, mu, tol).to_array()
    return u - VectorField.constant(mean) - VectorField.linear(A)


def _gram(a, b, mu):
    """Gram matrix int a_i . b_j dmu for stacked node values (nb, N, ...)."""
    nb = a.shape[0]
    out = np.empty((nb, b.shape[0]))
    axes = tuple(range(1, a.ndim - 1))
    for i in range(nb):
        prod = np.sum(a[i][None] * b, axis=tuple(ax + 1 for ax in axes))
        out[i] = mu.integrate(prod.T)
    return out


def build_basis(n: int, degree: int, mu: QuadratureMeasure,
                kernel_tol: float = KERNEL_TOL, moment_tol: float = DEFAULT_MOMENT_TOL) -> BasisSet:
    """Centered, antisym-projected Hermite vector fields with the kernel removed.

    Elements are kept greedily in enumeration order; an element is dropped
    when its Dirichlet norm, after removing its component along the elements
    already kept, falls below kernel_tol * max Dirichlet diagonal.  This
    removes rigid motions and linearly dependent duplicates alike.
    """
    if degree < 1:
        raise PreconditionError("basis degree must be >= 1")
    if mu.dim != n:
        raise PreconditionError("measure dimension does not match n")
    raw, labels = _raw_fields(n, degree)
    fields = [_normalize_field(u, mu, moment_tol) for u in raw]
    S = evaluate_sym_grads(fields, mu.nodes)
    K = _gram(S, S, mu)
    diag = np.diag(K)
    threshold = kernel_tol * max(float(np.max(diag)), 0.0)
    keep = []
    L = np.zeros((0, 0))
    for i in range(len(fields)):
        if keep:
            k = K[keep, i]
            y = np.linalg.solve(L, k)
            resid = K[i, i] - y @ y
        else:
            y = np.zeros(0)
            resid = K[i, i]
        if resid > threshold:
            r = math.sqrt(resid)
            size = len(keep)
            L2 = np.zeros((size + 1, size + 1))
            L2[:size, :size] = L
            L2[size, :size] = y
            L2[size, size] = r
            L = L2
            keep.append(i)
    if not keep:
        raise PreconditionError("basis is empty after kernel removal")
    return BasisSet(
        fields=tuple(fields[i] for i in keep),
        degree=degree,
        dim=n,
        labels=tuple(labels[i] for i in keep),
    )


def assemble(basis: BasisSet, mu: QuadratureMeasure) -> GramPair:
    """L2 Gram M and Dirichlet Gram K of the basis under mu."""
    if 2 * basis.degree > mu.exactness_degree:
        _warn(f"mass Gram needs exactness {2 * basis.degree}, rule has {mu.exactness_degree}")
    B = evaluate_fields(basis.fields, mu.nodes)
    S = evaluate_sym_grads(basis.fields, mu.nodes)
    M = _gram(B, B, mu)
    K = _gram(S, S, mu)
    return GramPair(M=0.5 * (M + M.T), K=0.5 * (K + K.T))


def _pick_top(lam, W, B):
    """Deterministic top eigenvector; ties resolved towards the lowest basis index."""
    top = lam[-1]
    cols = np.nonzero(lam >= top - TIE_TOL * max(1.0, abs(top)))[0]
    Wt = W[:, cols]
    if Wt.shape[1] == 1:
        w = Wt[:, 0]
        k = int(np.argmax(np.abs(w) > 1e-8 * np.max(np.abs(w))))
    else:
        P = Wt @ Wt.T
        rows = np.linalg.norm(P, axis=1)
        k = int(np.argmax(rows > 1e-8 * np.max(rows)))
        w = P[:, k]
    w = w / math.sqrt(float(w @ B @ w))
    if w[k] < 0:
        w = -w
    return w, len(cols)


def cpk_lower_bound(mu: QuadratureMeasure, degree: int,
                    moment_tol: float = DEFAULT_MOMENT_TOL) -> CpkEstimate:
    """Certified lower bound on C_PK(mu) from the degree-`degree` Galerkin space."""
    if degree < 2:
        raise PreconditionError("cpk_lower_bound needs degree >= 2")
    _require_moments(mu, moment_tol)
    basis = build_basis(mu.dim, degree, mu, moment_tol=moment_tol)
    gp = assemble(basis, mu)
    B = 2.0 * gp.K
    lam, W = generalized_eigh(gp.M, B)
    if not np.all(np.isfinite(lam)):
        raise ConditioningError("non-finite eigenvalues")
    w, mult = _pick_top(lam, W, B)
    return CpkEstimate(
        value=float(lam[-1]),
        degree=degree,
        basis_size=len(basis),
        witness=basis.combine(w),
        coeffs=w,
        eigenvalues=lam,
        multiplicity=mult,
    )


def _quotient_values(u, mu, tol):
    X = mu.nodes
    U = u.evaluate(X)
    mean = mu.integrate(U)
    A = antisym_projection(u, mu, tol).to_array()
    return U - mean - X @ A.T


def quotient_inner(u: VectorField, v: VectorField, mu: QuadratureMeasure,
                   tol: float = DEFAULT_MOMENT_TOL) -> float:
    """int (u - mean - A_u x) . (v - mean - A_v x) dmu."""
    Ru = _quotient_values(u, mu, tol)
    Rv = Ru if v is u else _quotient_values(v, mu, tol)
    return float(mu.integrate(np.sum(Ru * Rv, axis=1)))


def _dirichlet(u, v, mu):
    Su = evaluate_sym_grads([u], mu.nodes)[0]
    Sv = Su if v is u else evaluate_sym_grads([v], mu.nodes)[0]
    return float(mu.integrate(np.sum(Su * Sv, axis=(1, 2))))


def rayleigh(u: VectorField, mu: QuadratureMeasure, tol: float = DEFAULT_MOMENT_TOL) -> float:
    """Quotient norm over twice the Dirichlet energy."""
    s = _dirichlet(u, u, mu)
    if s <= 1e-14:
        raise PreconditionError("field lies in the kernel of the symmetrized gradient")
    return quotient_inner(u, u, mu, tol) / (2.0 * s)


def ibp_epsilon(u: VectorField, mu: QuadratureMeasure, C: float,
                tol: float = DEFAULT_MOMENT_TOL) -> float:
    """Smallest eps >= 0 with (2 - (eps/2)^2) C |sym_grad u|^2 <= quotient norm of u."""
    s = _dirichlet(u, u, mu)
    if s <= 1e-14:
        raise PreconditionError("field lies in the kernel of the symmetrized gradient")
    q = quotient_inner(u, u, mu, tol)
    if C < q / (2.0 * s) * (1.0 - 1e-12):
        raise PreconditionError(f"C={C} is below the Rayleigh quotient {q / (2.0 * s)}")
    return 2.0 * math.sqrt(max(0.0, 2.0 - q / (C * s)))


@dataclass(frozen=True)
class IbpCheck:
    lhs: float
    rhs: float
    holds: bool
    epsilon: float


def ibp_residual_check(u: VectorField, v: VectorField, mu: QuadratureMeasure, C: float,
                       tol: float = DEFAULT_MOMENT_TOL) -> IbpCheck:
    """Both sides of the approximate integration by parts formula for (u, v)."""
    eps = ibp_epsilon(u, mu, C, tol)
    lhs = abs(quotient_inner(u, v, mu, tol) - 2.0 * C * _dirichlet(u, v, mu))
    rhs = eps * C * math.sqrt(_dirichlet(u, u, mu)) * math.sqrt(max(_dirichlet(v, v, mu), 0.0))
    return IbpCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + 1e-10, epsilon=eps)
