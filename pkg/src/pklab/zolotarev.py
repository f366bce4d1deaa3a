"""Lower bounds on the order-2 Zolotarev distance and the stability check.

Every f(x) = -cos(theta . x)/|theta|^2 has Hessian cos(theta . x) theta theta^T
/ |theta|^2, of Frobenius (and operator) norm at most 1, so +-f is admissible
and max over theta of |E_nu cos - E_mu cos| / |theta|^2 bounds the distance
from below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import HypothesisError, PreconditionError
from .measure import DEFAULT_MOMENT_TOL, QuadratureMeasure, build_gauss_hermite, check_moments
from .spectral import cpk_lower_bound

RHS_CONSTANT = 20.0
DEFAULT_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class CosineTest:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).ravel()
        if not np.any(theta):
            raise PreconditionError("cosine test frequency must be nonzero")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def norm2(self):
        return float(self.theta @ self.theta)

    def value(self, X):
        return -np.cos(np.asarray(X) @ self.theta) / self.norm2

    def hessian(self, X):
        c = np.cos(np.asarray(X) @ self.theta)
        return c[:, None, None] * np.outer(self.theta, self.theta) / self.norm2


def default_theta_grid(n: int, count: int = 64, lo: float = 0.25, hi: float = 8.0) -> List[CosineTest]:
    """Log-spaced magnitudes along each coordinate axis and the diagonal."""
    mags = np.geomspace(lo, hi, count)
    dirs = list(np.eye(n)) + [np.ones(n) / math.sqrt(n)]
    return [CosineTest(r * d) for d in dirs for r in mags]


def characteristic(mu: QuadratureMeasure, theta) -> float:
    """E_mu cos(theta . x); closed form for toolkit product measures."""
    theta = np.asarray(theta, dtype=float)
    if mu.marginals is not None:
        return float(np.prod([s.characteristic(t) for s, t in zip(mu.marginals, theta)]))
    return float(mu.integrate(np.cos(mu.nodes @ theta)))


def zol2_lower(mu: QuadratureMeasure, nu: QuadratureMeasure, thetas: Sequence[CosineTest]) -> float:
    """max over the grid of |E_nu cos - E_mu cos| / |theta|^2."""
    if mu.dim != nu.dim:
        raise PreconditionError(f"dimension mismatch: {mu.dim} vs {nu.dim}")
    if not thetas:
        raise PreconditionError("theta grid is empty")
    best = 0.0
    for t in thetas:
        gap = abs(characteristic(nu, t.theta) - characteristic(mu, t.theta)) / t.norm2
        best = max(best, gap)
    return best


def stein_upper_bound(cpk: float, n: int, constant: float = RHS_CONSTANT) -> float:
    """constant * n^2 * sqrt(cpk (cpk - 1))."""
    if cpk < 1.0:
        raise PreconditionError(f"cpk={cpk} < 1 is impossible under the moment assumption")
    return constant * n * n * math.sqrt(cpk * (cpk - 1.0))


@dataclass(frozen=True)
class StabilityReport:
    cpk_lower: float
    zol2_lower: float
    rhs_constant: float
    rhs: float
    consistent: bool
    degree: int
    theta_grid_size: int
    slack: float = DEFAULT_SLACK
    dim: int = 0

    def to_dict(self):
        return {
            "degree": self.degree,
            "cpk_lower": self.cpk_lower,
            "zol2_lower": self.zol2_lower,
            "rhs_constant": self.rhs_constant,
            "rhs": self.rhs,
            "consistent": self.consistent,
            "theta_grid_size": self.theta_grid_size,
            "slack": self.slack,
        }


def stability_report(mu: QuadratureMeasure, degree: int, thetas: Sequence[CosineTest] = None,
                     slack: float = DEFAULT_SLACK, rhs_constant: float = RHS_CONSTANT,
                     gamma: QuadratureMeasure = None,
                     moment_tol: float = DEFAULT_MOMENT_TOL) -> StabilityReport:
    """Compare the Zolotarev lower bound with the stability right-hand side."""
    report = check_moments(mu, moment_tol)
    if not report.passes:
        raise HypothesisError("measure fails the moment assumption; the stability bound does not apply")
    if thetas is None:
        thetas = default_theta_grid(mu.dim)
    if gamma is None:
        gamma = build_gauss_hermite(mu.dim, max(mu.m, 2))
    est = cpk_lower_bound(mu, degree, moment_tol)
    # Round-off can put the Galerkin value a few ulps under 1.
    cpk = max(est.value, 1.0)
    zol = zol2_lower(mu, gamma, thetas)
    rhs = stein_upper_bound(cpk, mu.dim, rhs_constant)
    return StabilityReport(
        cpk_lower=est.value,
        zol2_lower=zol,
        rhs_constant=rhs_constant,
        rhs=rhs,
        consistent=zol <= rhs + slack,
        degree=degree,
        theta_grid_size=len(thetas),
        slack=slack,
        dim=mu.dim,
    )
