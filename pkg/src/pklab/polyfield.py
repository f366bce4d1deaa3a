"""Multivariate polynomial algebra for scalar, vector and matrix fields.

Polynomials are sparse maps from exponent tuples to float coefficients.
Vector and matrix fields are tuples of polynomials sharing one dimension.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .errors import PreconditionError, QuadratureExactnessWarning
from .measure import DEFAULT_MOMENT_TOL, QuadratureMeasure

Exponent = Tuple[int, ...]


def _clean(terms):
    return {e: float(c) for e, c in terms.items() if c != 0.0}


class Polynomial:
    """Sparse polynomial in ``dim`` variables with real coefficients.

    Example: ``Polynomial(2, {(1, 0): 1.0, (0, 2): -3.0})`` is x1 - 3 x2^2.
    Zero coefficients are never stored.
    """

    __slots__ = ("dim", "_terms")

    def __init__(self, dim: int, terms: Dict[Exponent, float] | None = None):
        self.dim = int(dim)
        terms = terms or {}
        for e in terms:
            if len(e) != self.dim or any(k < 0 for k in e):
                raise ValueError(f"bad exponent {e} for dim {self.dim}")
        self._terms = _clean({tuple(int(k) for k in e): c for e, c in terms.items()})

    @classmethod
    def zero(cls, dim):
        return cls(dim)

    @classmethod
    def constant(cls, c, dim):
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def variable(cls, k, dim):
        e = [0] * dim
        e[k] = 1
        return cls(dim, {tuple(e): 1.0})

    @classmethod
    def monomial(cls, exponents, coeff=1.0):
        exponents = tuple(exponents)
        return cls(len(exponents), {exponents: coeff})

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self):
        return not self._terms

    @property
    def degree(self):
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def coeff(self, exponents):
        return self._terms.get(tuple(exponents), 0.0)

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other
        return Polynomial.constant(float(other), self.dim)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(self.dim, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = float(other)
            return Polynomial(self.dim, {e: c * v for e, v in self._terms.items()})
        other = self._coerce(other)
        out: Dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(self.dim, out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __pow__(self, k):
        out = Polynomial.constant(1.0, self.dim)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self._terms == other._terms

    def __hash__(self):
        return hash((self.dim, tuple(sorted(self._terms.items()))))

    def allclose(self, other, atol=1e-12):
        other = self._coerce(other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self.coeff(e) - other.coeff(e)) <= atol for e in keys)

    def deriv(self, k):
        out = {}
        for e, c in self._terms.items():
            if e[k]:
                f = list(e)
                f[k] -= 1
                out[tuple(f)] = c * e[k]
        return Polynomial(self.dim, out)

    def gradient(self):
        return VectorField(tuple(self.deriv(k) for k in range(self.dim)))

    def evaluate(self, X):
        """Evaluate at the rows of X, shape (N, dim) -> (N,)."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[0])
        if not self._terms:
            return out
        top = max(max(e) for e in self._terms)
        powers = np.ones((top + 1,) + X.shape)
        for p in range(1, top + 1):
            powers[p] = powers[p - 1] * X
        cols = np.arange(self.dim)
        for e, c in sorted(self._terms.items()):
            out = out + c * np.prod(powers[list(e), :, cols].T, axis=1)
        return out

    def sorted_terms(self):
        """Terms in graded lexicographic order."""
        return sorted(self._terms.items(), key=lambda t: (sum(t[0]), t[0]))

    def to_json(self):
        return [{"exponents": list(e), "coeff": c} for e, c in self.sorted_terms()]

    @classmethod
    def from_json(cls, records, dim=None):
        records = list(records)
        if dim is None:
            if not records:
                raise ValueError("dim required for an empty polynomial")
            dim = len(records[0]["exponents"])
        return cls(dim, {tuple(r["exponents"]): r["coeff"] for r in records})

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(f"x{k + 1}^{p}" if p > 1 else f"x{k + 1}"
                            for k, p in enumerate(e) if p)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


@dataclass(frozen=True)
class VectorField:
    """Polynomial map R^n -> R^n."""

    components: Tuple[Polynomial, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("empty vector field")
        n = comps[0].dim
        if len(comps) != n or any(c.dim != n for c in comps):
            raise ValueError("component count must equal dim")

    @property
    def dim(self):
        return len(self.components)

    @property
    def degree(self):
        return max(c.degree for c in self.components)

    @classmethod
    def zero(cls, n):
        return cls(tuple(Polynomial.zero(n) for _ in range(n)))

    @classmethod
    def linear(cls, A):
        """The field x -> A x."""
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        comps = []
        for i in range(n):
            p = Polynomial.zero(n)
            for j in range(n):
                p = p + A[i, j] * Polynomial.variable(j, n)
            comps.append(p)
        return cls(tuple(comps))

    @classmethod
    def constant(cls, c):
        c = np.asarray(c, dtype=float)
        n = c.size
        return cls(tuple(Polynomial.constant(v, n) for v in c))

    def __getitem__(self, k):
        return self.components[k]

    def __add__(self, other):
        return VectorField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return VectorField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return VectorField(tuple(-a for a in self.components))

    def __mul__(self, c):
        return VectorField(tuple(a * float(c) for a in self.components))

    __rmul__ = __mul__

    def allclose(self, other, atol=1e-12):
        return all(a.allclose(b, atol) for a, b in zip(self.components, other.components))

    def evaluate(self, X):
        return np.stack([c.evaluate(X) for c in self.components], axis=-1)

    def to_json(self):
        return [c.to_json() for c in self.components]

    @classmethod
    def from_json(cls, data, dim=None):
        dim = dim or len(data)
        return cls(tuple(Polynomial.from_json(c, dim) for c in data))


@dataclass(frozen=True)
class MatrixField:
    """Polynomial map R^n -> M_{n x n}; ``entries[i][j]`` is the (i, j) entry."""

    entries: Tuple[Tuple[Polynomial, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("matrix field must be square")
        if any(p.dim != rows[0][0].dim for r in rows for p in r):
            raise ValueError("inconsistent dim")

    @property
    def dim(self):
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @property
    def T(self):
        n = self.dim
        return MatrixField(tuple(tuple(self.entries[j][i] for j in range(n)) for i in range(n)))

    def __add__(self, other):
        return MatrixField(tuple(tuple(a + b for a, b in zip(r, s))
                                 for r, s in zip(self.entries, other.entries)))

    def __mul__(self, c):
        return MatrixField(tuple(tuple(a * float(c) for a in r) for r in self.entries))

    __rmul__ = __mul__

    def is_zero(self):
        return all(p.is_zero() for r in self.entries for p in r)

    def allclose(self, other, atol=1e-12):
        return all(a.allclose(b, atol) for r, s in zip(self.entries, other.entries)
                   for a, b in zip(r, s))

    def is_symmetric(self):
        n = self.dim
        return all(self.entries[i][j] == self.entries[j][i]
                   for i in range(n) for j in range(i + 1, n))

    def evaluate(self, X):
        return np.stack([np.stack([p.evaluate(X) for p in r], axis=-1)
                         for r in self.entries], axis=-2)


class AntisymMatrix:
    """Antisymmetric n x n matrix stored as its strict upper triangle."""

    __slots__ = ("dim", "upper")

    def __init__(self, dim: int, upper: Sequence[float]):
        self.dim = int(dim)
        upper = np.array(upper, dtype=float).ravel()
        if upper.size != self.dim * (self.dim - 1) // 2:
            raise ValueError("wrong upper-triangle length")
        upper.setflags(write=False)
        self.upper = upper

    @staticmethod
    def index_pairs(n):
        """Basis enumeration order: (i, j) with i < j, lexicographic."""
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    @classmethod
    def from_array(cls, A, atol=0.0):
        A = np.asarray(A, dtype=float)
        if np.max(np.abs(A + A.T), initial=0.0) > atol:
            raise PreconditionError("matrix is not antisymmetric")
        n = A.shape[0]
        return cls(n, [0.5 * (A[i, j] - A[j, i]) for i, j in cls.index_pairs(n)])

    @classmethod
    def basis(cls, n):
        """E_ij - E_ji for i < j, in lexicographic order."""
        k = n * (n - 1) // 2
        return [cls(n, np.eye(k)[r]) for r in range(k)]

    def to_array(self):
        A = np.zeros((self.dim, self.dim))
        for c, (i, j) in zip(self.upper, self.index_pairs(self.dim)):
            A[i, j] = c
            A[j, i] = -c
        return A

    def field(self):
        return VectorField.linear(self.to_array())

    def norm(self):
        return float(np.linalg.norm(self.to_array()))

    def __repr__(self):
        return f"AntisymMatrix({self.to_array().tolist()})"


def jacobian(u: VectorField) -> MatrixField:
    """Entry (i, j) is d u_i / d x_j."""
    n = u.dim
    return MatrixField(tuple(tuple(u[i].deriv(j) for j in range(n)) for i in range(n)))


def sym_grad(u: VectorField) -> MatrixField:
    """Symmetrized gradient, entry (k, l) = (d_k u_l + d_l u_k) / 2."""
    n = u.dim
    rows = []
    for k in range(n):
        rows.append(tuple((u[l].deriv(k) + u[k].deriv(l)) * 0.5 for l in range(n)))
    return MatrixField(tuple(rows))


def _require_isotropic(mu, tol):
    cov = mu.covariance()
    res = float(np.max(np.abs(cov - np.eye(mu.dim))))
    if res > tol:
        raise PreconditionError(
            f"antisymmetric projection needs an isotropic measure (residual {res:.3g})"
        )


def antisym_projection(u: VectorField, mu: QuadratureMeasure,
                       tol: float = DEFAULT_MOMENT_TOL) -> AntisymMatrix:
    """A_u = 1/2 * int (u x^T - x u^T) dmu, the L2(mu)-closest antisymmetric map.

    Only valid for isotropic mu; raises PreconditionError otherwise.
    """
    _require_isotropic(mu, tol)
    _warn_exactness(mu, u.degree + 1)
    x = mu.nodes
    U = u.evaluate(x)
    A = 0.5 * mu.integrate(U[:, :, None] * x[:, None, :] - x[:, :, None] * U[:, None, :])
    return AntisymMatrix.from_array(A, atol=np.inf)


def candidate_field(i: int, j: int, n: int) -> VectorField:
    """u_k = delta_ik (1 - x_j^2) + delta_jk x_i x_j, with 1-based i != j."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise PreconditionError(f"indices must lie in 1..{n}")
    if i == j:
        raise PreconditionError("candidate field needs i != j")
    i0, j0 = i - 1, j - 1
    xi = Polynomial.variable(i0, n)
    xj = Polynomial.variable(j0, n)
    comps = [Polynomial.zero(n) for _ in range(n)]
    comps[i0] = 1.0 - xj * xj
    comps[j0] = xi * xj
    return VectorField(tuple(comps))


def _warn_exactness(mu, degree):
    if degree > mu.exactness_degree:
        warnings.warn(
            f"integrand degree {degree} exceeds quadrature exactness {mu.exactness_degree}",
            QuadratureExactnessWarning,
            stacklevel=3,
        )


def l2_inner(u: VectorField, v: VectorField, mu: QuadratureMeasure) -> float:
    """int u . v dmu."""
    _warn_exactness(mu, u.degree + v.degree)
    x = mu.nodes
    return float(mu.integrate(np.sum(u.evaluate(x) * v.evaluate(x), axis=1)))


def dirichlet_inner(u: VectorField, v: VectorField, mu: QuadratureMeasure) -> float:
    """int (sym_grad u) . (sym_grad v) dmu."""
    _warn_exactness(mu, max(u.degree - 1, 0) + max(v.degree - 1, 0))
    x = mu.nodes
    Su = sym_grad(u).evaluate(x)
    Sv = sym_grad(v).evaluate(x)
    return float(mu.integrate(np.sum(Su * Sv, axis=(1, 2))))


def evaluate_fields(fields: Iterable[VectorField], X) -> np.ndarray:
    """Stack field values at X: shape (nb, N, n)."""
    return np.stack([f.evaluate(X) for f in fields])


def evaluate_sym_grads(fields: Iterable[VectorField], X) -> np.ndarray:
    """Stack symmetrized gradients at X: shape (nb, N, n, n)."""
    return np.stack([sym_grad(f).evaluate(X) for f in fields])
