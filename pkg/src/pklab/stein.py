"""Gaussian Stein equation via the Ornstein-Uhlenbeck semigroup.

Two solvers produce phi_f = grad int_0^inf P_t f dt:

* ``hermite_spectral`` for polynomial f: expand f in tensor Hermite
  polynomials, divide each He_alpha coefficient by |alpha| and take the
  gradient.  Exact up to coefficient rounding.
* ``semigroup_quadrature`` for analytic f: with s = e^{-t},
  phi(x) = int_0^1 E[grad f(s x + sqrt(1 - s^2) Z)] ds, evaluated with
  Gauss-Legendre nodes in s and a tensor Gauss-Hermite rule in Z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import PreconditionError
from .hermite import from_hermite, gaussian_mean, to_hermite
from .measure import QuadratureMeasure, build_gauss_hermite
from .polyfield import MatrixField, Polynomial, VectorField, jacobian

STEIN_K = 1.0 + 10.0 / math.sqrt(3.0)
PROBE_SEED = 0x5EED
MAX_POLY_DEGREE = 8
DEFAULT_S_NODES = 64
DEFAULT_Z_NODES = 20

Evaluator = Callable[[np.ndarray], np.ndarray]


class ScalarField:
    """A scalar function on R^n with vectorised derivative evaluators.

    Evaluators map points of shape (N, n) to values (N,), gradients (N, n),
    Hessians (N, n, n) and, when available, third derivatives (N, n, n, n).
    """

    def __init__(self, dim, value: Evaluator, gradient: Evaluator, hessian: Evaluator,
                 third: Optional[Evaluator] = None, kind="analytic",
                 polynomial: Optional[Polynomial] = None,
                 mean: Optional[float] = None, hessian_bound: Optional[float] = None,
                 label=""):
        self.dim = int(dim)
        self._value = value
        self._gradient = gradient
        self._hessian = hessian
        self._third = third
        self.kind = kind
        self.polynomial = polynomial
        self._mean = mean
        self.hessian_bound = hessian_bound
        self.label = label

    @classmethod
    def from_polynomial(cls, p: Polynomial, label=""):
        n = p.dim
        g = [p.deriv(i) for i in range(n)]
        h = [[gi.deriv(j) for j in range(n)] for gi in g]
        t = [[[hij.deriv(k) for k in range(n)] for hij in hi] for hi in h]

        def grad(X):
            return np.stack([q.evaluate(X) for q in g], axis=-1)

        def hess(X):
            return np.stack([np.stack([q.evaluate(X) for q in r], -1) for r in h], -2)

        def third(X):
            return np.stack([np.stack([np.stack([q.evaluate(X) for q in c], -1)
                                       for c in r], -2) for r in t], -3)

        return cls(n, p.evaluate, grad, hess, third, kind="polynomial", polynomial=p,
                   mean=gaussian_mean(p), label=label or repr(p))

    @classmethod
    def cosine(cls, theta, label=""):
        """f(x) = -cos(theta . x) / |theta|^2, whose Hessian norm is |cos| <= 1."""
        theta = np.asarray(theta, dtype=float)
        t2 = float(theta @ theta)
        if t2 == 0.0:
            raise PreconditionError("cosine test needs a nonzero frequency")
        tt = np.outer(theta, theta) / t2
        ttt = np.einsum("i,j,k->ijk", theta, theta, theta) / t2

        def value(X):
            return -np.cos(X @ theta) / t2

        def grad(X):
            return np.sin(X @ theta)[:, None] * theta / t2

        def hess(X):
            return np.cos(X @ theta)[:, None, None] * tt

        def third(X):
            return -np.sin(X @ theta)[:, None, None, None] * ttt

        return cls(theta.size, value, grad, hess, third, kind="analytic",
                   mean=-math.exp(-0.5 * t2) / t2, hessian_bound=1.0,
                   label=label or f"cosine({','.join(repr(float(v)) for v in theta)})")

    def value(self, X):
        return self._value(np.atleast_2d(X))

    def gradient(self, X):
        return self._gradient(np.atleast_2d(X))

    def hessian(self, X):
        return self._hessian(np.atleast_2d(X))

    def third(self, X):
        if self._third is None:
            raise PreconditionError("third derivatives not available for this field")
        return self._third(np.atleast_2d(X))

    @property
    def has_third(self):
        return self._third is not None

    def gaussian_mean(self, m=DEFAULT_Z_NODES):
        if self._mean is None:
            g = build_gauss_hermite(self.dim, m)
            self._mean = float(g.integrate(self.value(g.nodes)))
        return self._mean

    def __sub__(self, other):
        """Difference of two fields (analytic unless both are polynomial)."""
        if self.polynomial is not None and other.polynomial is not None:
            return ScalarField.from_polynomial(self.polynomial - other.polynomial)
        third = None
        if self.has_third and other.has_third:
            def third(X):
                return self.third(X) - other.third(X)
        return ScalarField(
            self.dim,
            lambda X: self.value(X) - other.value(X),
            lambda X: self.gradient(X) - other.gradient(X),
            lambda X: self.hessian(X) - other.hessian(X),
            third,
            mean=self.gaussian_mean() - other.gaussian_mean(),
            label=f"({self.label}) - ({other.label})",
        )


class SteinSolution:
    """phi solving f - int f dgamma = x . phi - Tr(grad phi)."""

    def __init__(self, dim, kind, phi: Evaluator, jac: Evaluator,
                 hess: Optional[Evaluator] = None, field: Optional[VectorField] = None,
                 potential: Optional[Polynomial] = None):
        self.dim = int(dim)
        self.kind = kind
        self._phi = phi
        self._jac = jac
        self._hess = hess
        self.field = field
        self.potential = potential
        self._cache = {}
        origin = np.zeros((1, self.dim))
        self.origin_value = self.phi(origin)[0]
        self.origin_jacobian = self.jacobian(origin)[0]

    def _cached(self, name, fn, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        key = (name, X.shape, X.tobytes())
        hit = self._cache.get(name)
        if hit is not None and hit[0] == key:
            return hit[1].copy()
        out = fn(X)
        self._cache[name] = (key, out)
        return out.copy()

    def phi(self, X):
        return self._cached("phi", self._phi, X)

    def jacobian(self, X):
        """Entry (i, j) is d phi_i / d x_j; shape (N, n, n)."""
        return self._cached("jac", self._jac, X)

    def hessian(self, X):
        """Entry (i, j, k) is d_j d_k phi_i; shape (N, n, n, n)."""
        if self._hess is None:
            raise PreconditionError("second derivatives of phi are not available")
        return self._hess(np.atleast_2d(np.asarray(X, dtype=float)))

    @property
    def has_hessian(self):
        return self._hess is not None


def ou_semigroup(f: ScalarField, t: float, x, gamma_quad: QuadratureMeasure):
    """P_t f(x) = int f(e^{-t} x + sqrt(1 - e^{-2t}) z) dgamma(z) by quadrature."""
    if t < 0:
        raise PreconditionError("semigroup time must be >= 0")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = math.exp(-t)
    b = math.sqrt(max(0.0, 1.0 - a * a))
    Z = gamma_quad.nodes
    out = np.empty(x.shape[0])
    for r, xr in enumerate(x):
        out[r] = gamma_quad.integrate(f.value(a * xr + b * Z))
    return out


def _field_evaluators(field: VectorField):
    J = jacobian(field)
    H = [[[J[i, j].deriv(k) for k in range(field.dim)] for j in range(field.dim)]
         for i in range(field.dim)]

    def hess(X):
        return np.stack([np.stack([np.stack([q.evaluate(X) for q in c], -1)
                                   for c in r], -2) for r in H], -3)

    return field.evaluate, J.evaluate, hess


def _spectral_solution(potential: Polynomial) -> SteinSolution:
    field = potential.gradient()
    phi, jac, hess = _field_evaluators(field)
    return SteinSolution(potential.dim, "hermite_spectral", phi, jac, hess,
                         field=field, potential=potential)


def _solve_spectral(f: ScalarField) -> SteinSolution:
    p = f.polynomial
    if p.degree > MAX_POLY_DEGREE:
        raise PreconditionError(f"polynomial degree {p.degree} exceeds {MAX_POLY_DEGREE}")
    coeffs = to_hermite(p)
    h = {a: c / sum(a) for a, c in coeffs.items() if sum(a) > 0}
    return _spectral_solution(from_hermite(h, p.dim))


def _solve_semigroup(f: ScalarField, s_nodes: int, z_nodes: int) -> SteinSolution:
    n = f.dim
    s, ws = np.polynomial.legendre.leggauss(s_nodes)
    s = 0.5 * (s + 1.0)
    ws = 0.5 * ws
    sig = np.sqrt(1.0 - s * s)
    gq = build_gauss_hermite(n, z_nodes)
    Z, wz = gq.nodes, gq.weights
    # Weight of each (s, z) pair; row-major over s then z.
    W = (ws[:, None] * wz[None, :]).ravel()

    nz = Z.shape[0] * s.size

    def shifted(X):
        return (s[None, :, None, None] * X[:, None, None, :]
                + sig[None, :, None, None] * Z[None, None, :, :]).reshape(-1, n)

    def apply(evaluate, power):
        wk = W * np.repeat(s ** power, Z.shape[0])

        def fn(X):
            out = []
            for start in range(0, X.shape[0], 8):
                chunk = X[start:start + 8]
                vals = evaluate(shifted(chunk))
                vals = vals.reshape((chunk.shape[0], nz) + vals.shape[1:])
                w = wk.reshape((1, nz) + (1,) * (vals.ndim - 2))
                out.append(np.ascontiguousarray(np.moveaxis(vals * w, 1, -1)).sum(-1))
            return np.concatenate(out) if out else np.zeros((0,) + (n,) * (power + 1))
        return fn

    hess = apply(f.third, 2) if f.has_third else None
    return SteinSolution(n, "semigroup_quadrature", apply(f.gradient, 0),
                         apply(f.hessian, 1), hess)


def solve_stein(f: ScalarField, s_nodes: int = DEFAULT_S_NODES,
                z_nodes: int = DEFAULT_Z_NODES) -> SteinSolution:
    """Barbour's solution of the Gaussian Poisson equation for f."""
    mean = f.gaussian_mean(z_nodes)
    if not np.isfinite(mean):
        raise PreconditionError("f has no finite Gaussian mean")
    if f.polynomial is not None:
        return _solve_spectral(f)
    return _solve_semigroup(f, s_nodes, z_nodes)


def poisson_residuals(f: ScalarField, sol: SteinSolution, probes) -> np.ndarray:
    X = np.atleast_2d(np.asarray(probes, dtype=float))
    lhs = f.value(X) - f.gaussian_mean()
    rhs = np.sum(X * sol.phi(X), axis=1) - np.trace(sol.jacobian(X), axis1=1, axis2=2)
    return np.abs(lhs - rhs)


def verify_poisson(f: ScalarField, sol: SteinSolution, probes) -> float:
    """Max over probes of |f - int f dgamma - x . phi + Tr grad phi|."""
    return float(np.max(poisson_residuals(f, sol, probes)))


def recenter_solution(f: ScalarField, sol: SteinSolution):
    """Subtract the affine part of phi_f at the origin.

    Returns (g, sol_g) with g = f - a.x - x^T J x and
    phi_g = phi_f - phi_f(0) - J x, where a = phi_f(0) and J = grad phi_f(0).
    The quadratic x^T J x has Stein solution J x (Hessian 2J), which is why
    the subtracted quadratic form carries the factor 2 on every entry.
    """
    n = f.dim
    a = np.array(sol.origin_value, dtype=float)
    J = np.array(sol.origin_jacobian, dtype=float)
    J = 0.5 * (J + J.T)
    x = [Polynomial.variable(k, n) for k in range(n)]
    lin = Polynomial.zero(n)
    form = Polynomial.zero(n)
    for i in range(n):
        lin = lin + a[i] * x[i]
        for j in range(n):
            form = form + J[i, j] * (x[i] * x[j])
    g = f - ScalarField.from_polynomial(lin + form)
    if sol.field is not None:
        field = sol.field - VectorField.constant(a) - VectorField.linear(J)
        potential = None
        if sol.potential is not None:
            potential = sol.potential - lin - form * 0.5
        phi, jac, hess = _field_evaluators(field)
        sol_g = SteinSolution(n, sol.kind, phi, jac, hess, field=field, potential=potential)
    else:
        sol_g = SteinSolution(
            n, sol.kind,
            lambda X: sol.phi(X) - a - X @ J.T,
            lambda X: sol.jacobian(X) - J,
            sol._hess,
        )
    return g, sol_g


class MatrixTestField:
    """Matrix-valued test function with analytic entry gradients.

    ``values(X)`` has shape (N, n, n); ``gradients(X)`` has shape
    (N, n, n, n) with [..., i, j, k] = d_k V_ij.
    """

    def __init__(self, dim, values: Evaluator, gradients: Evaluator, label=""):
        self.dim = int(dim)
        self._values = values
        self._gradients = gradients
        self.label = label

    def values(self, X):
        return self._values(np.atleast_2d(np.asarray(X, dtype=float)))

    def gradients(self, X):
        return self._gradients(np.atleast_2d(np.asarray(X, dtype=float)))

    @classmethod
    def from_matrix_field(cls, V: MatrixField, label=""):
        n = V.dim
        G = [[[V[i, j].deriv(k) for k in range(n)] for j in range(n)] for i in range(n)]

        def grads(X):
            return np.stack([np.stack([np.stack([q.evaluate(X) for q in c], -1)
                                       for c in r], -2) for r in G], -3)

        return cls(n, V.evaluate, grads, label)


def build_V(sol_g: SteinSolution, tol: float = 1e-10) -> MatrixTestField:
    """V(x) = x phi_g(x)^T / |x|^2 (and V(0) = 0), so that V(x)^T x = phi_g(x)."""
    if np.max(np.abs(sol_g.origin_value)) > tol or np.max(np.abs(sol_g.origin_jacobian)) > tol:
        raise PreconditionError(
            "phi_g(0) and grad phi_g(0) must vanish; call recenter_solution first"
        )
    n = sol_g.dim

    def values(X):
        r2 = np.sum(X * X, axis=1)
        safe = np.where(r2 > 0, r2, 1.0)
        V = X[:, :, None] * sol_g.phi(X)[:, None, :] / safe[:, None, None]
        V[r2 == 0] = 0.0
        return V

    def gradients(X):
        r2 = np.sum(X * X, axis=1)
        safe = np.where(r2 > 0, r2, 1.0)
        P = sol_g.phi(X)
        DP = sol_g.jacobian(X)  # [., j, k] = d_k phi_j
        eye = np.eye(n)
        G = (-2.0 * X[:, :, None, None] * P[:, None, :, None] * X[:, None, None, :]
             / (safe ** 2)[:, None, None, None])
        G = G + (eye[None, :, None, :] * P[:, None, :, None]
                 + X[:, :, None, None] * DP[:, None, :, :]) / safe[:, None, None, None]
        G[r2 == 0] = 0.0
        return G

    return MatrixTestField(n, values, gradients, label="V")


def stein_terms(V: MatrixTestField, mu: QuadratureMeasure):
    """(int (x x^T - Id) . V dmu, int sum_ij x_i d_j V_ij dmu)."""
    X = mu.nodes
    n = mu.dim
    if np.any(np.sum(X * X, axis=1) == 0.0):
        raise PreconditionError("quadrature node at the origin")
    Vx = V.values(X)
    G = V.gradients(X)
    outer = X[:, :, None] * X[:, None, :] - np.eye(n)
    first = mu.integrate(np.sum(outer * Vx, axis=(1, 2)))
    div = np.einsum("ni,nijj->n", X, G)
    second = mu.integrate(div)
    return float(first), float(second)


def stein_residual(V: MatrixTestField, mu: QuadratureMeasure) -> float:
    first, second = stein_terms(V, mu)
    return abs(first - second)


def gradient_norms(V: MatrixTestField, mu: QuadratureMeasure) -> np.ndarray:
    """||grad V_ij||_{L2(mu)} for every entry, shape (n, n)."""
    G = V.gradients(mu.nodes)
    return np.sqrt(mu.integrate(np.sum(G * G, axis=-1)))


def approx_stein_bound(V: MatrixTestField, mu: QuadratureMeasure, cpk: float) -> float:
    """K sqrt(C (C - 1)) sum_ij ||grad V_ij||, K = 1 + 10/sqrt(3)."""
    return STEIN_K * math.sqrt(max(cpk * (cpk - 1.0), 0.0)) * float(np.sum(gradient_norms(V, mu)))


@dataclass(frozen=True)
class RegularityReport:
    max_grad_phi: float
    max_hess_phi: Optional[float]
    hessian_f_sup: float
    lipschitz_ok: bool
    hessian_ok: Optional[bool]

    def to_dict(self):
        return {
            "max_grad_phi": self.max_grad_phi,
            "max_hess_phi": self.max_hess_phi,
            "hessian_f_sup": self.hessian_f_sup,
            "lipschitz_ok": self.lipschitz_ok,
            "hessian_ok": self.hessian_ok,
        }


def regularity_check(f: ScalarField, sol: SteinSolution, grid, slack: float = 1e-8) -> RegularityReport:
    """Check sup|grad phi| <= sup|hess f| / 2 and sup|hess phi| <= sup|hess f| on a grid.

    All norms are Frobenius norms of the flattened derivative tensors.
    sup|hess f| is the field's declared bound when it has one, else the grid max.
    """
    X = np.atleast_2d(np.asarray(grid, dtype=float))
    hf = f.hessian_bound
    if hf is None:
        hf = float(np.max(np.linalg.norm(f.hessian(X).reshape(len(X), -1), axis=1)))
    gphi = float(np.max(np.linalg.norm(sol.jacobian(X).reshape(len(X), -1), axis=1)))
    hphi = None
    hess_ok = None
    if sol.has_hessian:
        hphi = float(np.max(np.linalg.norm(sol.hessian(X).reshape(len(X), -1), axis=1)))
        hess_ok = hphi <= hf + slack
    return RegularityReport(gphi, hphi, hf, gphi <= 0.5 * hf + slack, hess_ok)


def probe_points(n: int, count: int = 100, radius: float = 4.0, seed: int = PROBE_SEED) -> np.ndarray:
    """Scaled Gauss-Hermite nodes followed by seeded uniform points in a ball."""
    g = build_gauss_hermite(n, 4)
    pts = [g.nodes[: min(count, g.node_count)]]
    rest = count - pts[0].shape[0]
    if rest > 0:
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((rest, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = radius * rng.random(rest) ** (1.0 / n)
        pts.append(d * r[:, None])
    return np.concatenate(pts)
