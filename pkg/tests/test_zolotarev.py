import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pklab.errors import HypothesisError, PreconditionError
from pklab.measure import MarginalSpec, QuadratureMeasure, build_gauss_hermite, build_product
from pklab.zolotarev import (
    RHS_CONSTANT,
    CosineTest,
    characteristic,
    default_theta_grid,
    stability_report,
    stein_upper_bound,
    zol2_lower,
)

from conftest import CPK_MINUS_ONE, DELTAS, h6_product

GAMMA = build_gauss_hermite(2, 10)


def strip_marginals(mu):
    """Same nodes and weights, forcing the quadrature path for characteristics."""
    return QuadratureMeasure(dim=mu.dim, nodes=mu.nodes, weights=mu.weights,
                             exactness_degree=mu.exactness_degree, m=mu.m)


@pytest.mark.parametrize("delta", DELTAS)
def test_zolotarev_oracle(delta):
    # On an axis the gap is delta t^4 exp(-t^2/2), maximal at t = 2.
    got = zol2_lower(h6_product(delta), GAMMA, default_theta_grid(2))
    assert got == pytest.approx(16 * math.exp(-2) * delta, rel=0.02)


def test_zolotarev_exact_peak_on_axis():
    delta = 0.004
    got = zol2_lower(h6_product(delta), GAMMA, [CosineTest([2.0, 0.0])])
    assert got == pytest.approx(16 * math.exp(-2) * delta, rel=1e-12)


def test_gaussian_against_itself():
    assert zol2_lower(GAMMA, build_gauss_hermite(2, 6), default_theta_grid(2)) <= 1e-12


def test_symmetric_in_arguments():
    mu = h6_product(0.006)
    grid = default_theta_grid(2, 16)
    assert zol2_lower(mu, GAMMA, grid) == zol2_lower(GAMMA, mu, grid)


def test_superset_grid_never_decreases():
    mu = h6_product(0.006)
    coarse = default_theta_grid(2, 8)
    extra = coarse + [CosineTest([1.9, 0.1]), CosineTest([0.3, -2.2])]
    assert zol2_lower(mu, GAMMA, extra) >= zol2_lower(mu, GAMMA, coarse)


@settings(max_examples=30, deadline=None)
@given(t1=st.floats(-3, 3), t2=st.floats(-3, 3), delta=st.floats(0, 0.009))
def test_closed_form_matches_quadrature(t1, t2, delta):
    if t1 == 0 and t2 == 0:
        return
    mu = build_product([MarginalSpec.hermite6(delta)] * 2, 24)
    closed = characteristic(mu, [t1, t2])
    quad = characteristic(strip_marginals(mu), [t1, t2])
    assert closed == pytest.approx(quad, abs=1e-9)


def test_characteristic_gaussian_var():
    mu = build_product([MarginalSpec.gaussian_var(2.0), MarginalSpec.standard_normal()], 8)
    assert characteristic(mu, [1.0, 0.5]) == pytest.approx(math.exp(-1.0 - 0.125), rel=1e-14)


def test_cosine_is_admissible():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 2)) * 3
    for t in default_theta_grid(2, 6):
        H = t.hessian(X)
        assert np.max(np.linalg.norm(H.reshape(len(X), -1), axis=1)) <= 1 + 1e-12


def test_zero_frequency_rejected():
    with pytest.raises(PreconditionError):
        CosineTest([0.0, 0.0])


def test_dimension_mismatch_and_empty_grid():
    with pytest.raises(PreconditionError):
        zol2_lower(GAMMA, build_gauss_hermite(3, 4), default_theta_grid(2))
    with pytest.raises(PreconditionError):
        zol2_lower(GAMMA, GAMMA, [])


def test_grid_layout():
    grid = default_theta_grid(3, 64)
    assert len(grid) == 4 * 64
    norms = sorted({round(math.sqrt(t.norm2), 12) for t in grid})
    assert norms[0] == pytest.approx(0.25) and norms[-1] == pytest.approx(8.0)


def test_upper_bound_examples():
    assert RHS_CONSTANT == 20.0
    assert stein_upper_bound(1.0, 2) == 0.0
    assert stein_upper_bound(1.0001, 2) == pytest.approx(0.80004, rel=1e-5)
    assert stein_upper_bound(2.0, 3, constant=1.0) == pytest.approx(9 * math.sqrt(2))
    with pytest.raises(PreconditionError):
        stein_upper_bound(0.99, 2)


@pytest.mark.parametrize("delta", DELTAS)
def test_stability_report_consistent(delta):
    rep = stability_report(h6_product(delta), 4)
    assert rep.consistent
    assert rep.cpk_lower - 1 == pytest.approx(CPK_MINUS_ONE[delta], rel=1e-9)
    assert rep.rhs == pytest.approx(80 * math.sqrt(rep.cpk_lower * (rep.cpk_lower - 1)))
    assert set(rep.to_dict()) >= {"cpk_lower", "zol2_lower", "rhs_constant", "rhs", "consistent"}


def test_stability_report_gaussian():
    rep = stability_report(GAMMA, 3)
    assert rep.consistent
    assert rep.zol2_lower <= 1e-12


def test_stability_report_requires_moments():
    mu = build_product([MarginalSpec.gaussian_var(2.0), MarginalSpec.standard_normal()], 8)
    with pytest.raises(HypothesisError):
        stability_report(mu, 2)
