"""Probability measures on R^n represented by deterministic tensor quadrature.

Every measure built here is a tensor Gauss-Hermite rule (probabilists'
convention, weight exp(-x^2/2)) whose per-axis weights are reshaped to match
a one-dimensional marginal.  Integration is a plain weighted sum over nodes,
so every number downstream is reproducible bit-for-bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import hermite_e
from scipy.optimize import minimize_scalar

from .errors import NodeBudgetError, PositivityError, PreconditionError

DEFAULT_NODE_BUDGET = 10**7
DEFAULT_MOMENT_TOL = 1e-10

MARGINAL_KINDS = ("standard_normal", "hermite6", "gaussian_var")


def he6(x):
    """Probabilists' Hermite polynomial of degree 6."""
    x2 = np.asarray(x, dtype=float) ** 2
    return ((x2 - 15.0) * x2 + 45.0) * x2 - 15.0


@dataclass(frozen=True)
class MarginalSpec:
    kind: str
    param: Optional[float] = None

    def __post_init__(self):
        if self.kind not in MARGINAL_KINDS:
            raise PreconditionError(f"unknown marginal kind {self.kind!r}")
        if self.kind == "gaussian_var":
            if self.param is None or not self.param > 0:
                raise PreconditionError("gaussian_var requires sigma2 > 0")
        if self.kind == "hermite6" and self.param is None:
            raise PreconditionError("hermite6 requires a delta")

    @classmethod
    def standard_normal(cls):
        return cls("standard_normal")

    @classmethod
    def hermite6(cls, delta):
        return cls("hermite6", float(delta))

    @classmethod
    def gaussian_var(cls, sigma2):
        return cls("gaussian_var", float(sigma2))

    def to_dict(self):
        if self.kind == "standard_normal":
            return {"kind": self.kind}
        key = "delta" if self.kind == "hermite6" else "sigma2"
        return {"kind": self.kind, key: self.param}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "hermite6":
            return cls.hermite6(d["delta"])
        if kind == "gaussian_var":
            return cls.gaussian_var(d["sigma2"])
        return cls(kind)

    def characteristic(self, t):
        """Closed-form E[cos(t X)] for this marginal (all marginals are even)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "standard_normal":
            return np.exp(-0.5 * t**2)
        if self.kind == "gaussian_var":
            return np.exp(-0.5 * self.param * t**2)
        # E_gamma[He6(X) e^{itX}] = (it)^6 e^{-t^2/2} = -t^6 e^{-t^2/2}
        return np.exp(-0.5 * t**2) * (1.0 - self.param * t**6)


@dataclass(frozen=True, eq=False)
class QuadratureMeasure:
    """A discrete probability measure given by quadrature nodes and weights.

    ``exactness_degree`` is the largest total polynomial degree integrated
    exactly against the measure being represented (0 when unknown).
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int = 0
    m: int = 0
    kind: str = "custom"
    marginals: Optional[tuple] = None
    node_count: int = field(init=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise PreconditionError(f"nodes must have shape (N, {self.dim})")
        if weights.shape != (nodes.shape[0],) or weights.size == 0:
            raise PreconditionError("node count must equal weight count and be > 0")
        if np.any(weights < 0):
            raise PositivityError("negative quadrature weight")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise PreconditionError(f"weights sum to {weights.sum()!r}, not 1")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "node_count", int(weights.size))

    def integrate(self, values):
        """Integrate node values (node axis first) against the measure.

        The node axis is reduced last over contiguous memory so numpy uses
        pairwise summation; the result does not depend on thread count.
        """
        values = np.asarray(values, dtype=float)
        w = self.weights.reshape((-1,) + (1,) * (values.ndim - 1))
        prod = np.ascontiguousarray(np.moveaxis(values * w, 0, -1))
        return prod.sum(axis=-1)

    def expect(self, fn):
        return self.integrate(fn(self.nodes))

    def mean(self):
        return self.integrate(self.nodes)

    def covariance(self):
        x = self.nodes
        return self.integrate(x[:, :, None] * x[:, None, :])

    def params(self):
        if self.marginals is None:
            return {}
        return {"marginals": [s.to_dict() for s in self.marginals]}


def _gauss_hermite_1d(m):
    x, w = hermite_e.hermegauss(m)
    w = w / w.sum()
    return x, w


def _marginal_rule(spec: MarginalSpec, m: int):
    """Nodes, weights and exactness of the m-point rule for one marginal."""
    x, w = _gauss_hermite_1d(m)
    if spec.kind == "standard_normal":
        return x, w, 2 * m - 1
    if spec.kind == "gaussian_var":
        # Scaled nodes keep the rule exact; a density-ratio weight would not.
        return x * math.sqrt(spec.param), w, 2 * m - 1
    delta = spec.param
    bound = max_delta_h6()
    if abs(delta) >= bound:
        raise PositivityError(
            f"hermite6 delta={delta} outside |delta| < {bound:.6g}"
        )
    density = 1.0 + delta * he6(x)
    if np.any(density < 0):
        raise PositivityError(
            f"hermite6 delta={delta} gives a negative weight at m={m}"
        )
    w = w * density
    w = w / w.sum()
    return x, w, (2 * m - 7 if delta != 0.0 else 2 * m - 1)


def _check_m(m, budget, n):
    if m < 2 or m % 2:
        raise PreconditionError(
            f"nodes-per-axis m={m} must be even and >= 2 (odd m puts a node at 0)"
        )
    if m**n > budget:
        raise NodeBudgetError(
            f"{m}^{n} = {m**n} nodes exceeds budget {budget}; lower m or n"
        )


def _tensor(rules):
    xs = [r[0] for r in rules]
    ws = [r[1] for r in rules]
    nodes = np.array(list(itertools.product(*xs)), dtype=float)
    weights = np.prod(np.array(list(itertools.product(*ws)), dtype=float), axis=1)
    weights = weights / weights.sum()
    return nodes, weights


def build_gauss_hermite(n: int, m: int, node_budget: int = DEFAULT_NODE_BUDGET) -> QuadratureMeasure:
    """Tensor Gauss-Hermite rule for the standard Gaussian on R^n."""
    if n < 2:
        raise PreconditionError("dimension n must be >= 2")
    _check_m(m, node_budget, n)
    rule = _gauss_hermite_1d(m)
    nodes, weights = _tensor([rule] * n)
    return QuadratureMeasure(
        dim=n,
        nodes=nodes,
        weights=weights,
        exactness_degree=2 * m - 1,
        m=m,
        kind="gaussian",
        marginals=tuple(MarginalSpec.standard_normal() for _ in range(n)),
    )


def build_product(specs: Sequence[MarginalSpec], m: int,
                  node_budget: int = DEFAULT_NODE_BUDGET) -> QuadratureMeasure:
    """Product measure with the given one-dimensional marginals.

    hermite6 marginals reweight the Gauss-Hermite nodes by the density ratio
    1 + delta*He6(x); gaussian_var marginals rescale the nodes by sigma.
    """
    specs = tuple(specs)
    n = len(specs)
    if n < 2:
        raise PreconditionError("a product needs at least 2 marginals")
    _check_m(m, node_budget, n)
    rules = [_marginal_rule(s, m) for s in specs]
    nodes, weights = _tensor(rules)
    return QuadratureMeasure(
        dim=n,
        nodes=nodes,
        weights=weights,
        exactness_degree=min(r[2] for r in rules),
        m=m,
        kind="product",
        marginals=specs,
    )


@dataclass(frozen=True)
class MomentReport:
    centered_residual: float
    isotropy_residual: float
    third_moment_residual: float
    fourth_moment_residual: float
    passes: bool
    tolerance: float
    exactness_warning: bool = False

    def to_dict(self):
        return {
            "centered_residual": self.centered_residual,
            "isotropy_residual": self.isotropy_residual,
            "third_moment_residual": self.third_moment_residual,
            "fourth_moment_residual": self.fourth_moment_residual,
            "passes": self.passes,
            "tolerance": self.tolerance,
            "exactness_warning": self.exactness_warning,
        }


def check_moments(mu: QuadratureMeasure, tol: float = DEFAULT_MOMENT_TOL) -> MomentReport:
    """Residuals of the moment assumption (centered, isotropic, third, fourth)."""
    x = mu.nodes
    n = mu.dim
    first = mu.integrate(x)
    second = mu.integrate(x[:, :, None] * x[:, None, :])
    third = mu.integrate(x[:, :, None, None] * x[:, None, :, None] * x[:, None, None, :])
    sq = x**2
    mixed = mu.integrate(sq[:, :, None] * sq[:, None, :])  # [i, j] = E x_i^2 x_j^2
    fourth = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                fourth = max(fourth, abs(mixed[i, j] + mixed[j, j] - 4.0))
    res = (
        float(np.max(np.abs(first))),
        float(np.max(np.abs(second - np.eye(n)))),
        float(np.max(np.abs(third))),
        float(fourth),
    )
    return MomentReport(
        *res,
        passes=all(r <= tol for r in res),
        tolerance=tol,
        exactness_warning=mu.exactness_degree < 4,
    )


def max_delta_h6() -> float:
    """Largest |delta| for which 1 + delta*He6 stays nonnegative on R (delta > 0)."""
    return _MAX_DELTA_H6


def _compute_max_delta_h6():
    grid = np.linspace(0.0, 6.0, 6001)
    k = int(np.argmin(he6(grid)))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    res = minimize_scalar(lambda t: float(he6(t)), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    return 1.0 / abs(min(res.fun, float(he6(grid[k]))))


_MAX_DELTA_H6 = _compute_max_delta_h6()


def measure_record(mu: QuadratureMeasure, tol: float = DEFAULT_MOMENT_TOL) -> dict:
    """JSON-ready dump of a measure (no node arrays)."""
    return {
        "dim": mu.dim,
        "m": mu.m,
        "kind": mu.kind,
        "params": mu.params(),
        "node_count": mu.node_count,
        "moment_report": check_moments(mu, tol).to_dict(),
    }


def measure_from_record(record: dict, node_budget: int = DEFAULT_NODE_BUDGET) -> QuadratureMeasure:
    kind = record["kind"]
    if kind == "gaussian":
        return build_gauss_hermite(record["dim"], record["m"], node_budget)
    if kind == "product":
        specs = [MarginalSpec.from_dict(d) for d in record["params"]["marginals"]]
        return build_product(specs, record["m"], node_budget)
    raise PreconditionError(f"cannot rebuild measure of kind {kind!r}")
