"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import itertools
import math
import time

import numpy as np
import pytest

from pklab import cli
from pklab.linalg import generalized_eigh
from pklab.measure import build_gauss_hermite, check_moments
from pklab.polyfield import MatrixField, Polynomial, VectorField, candidate_field, dirichlet_inner
from pklab.spectral import cpk_lower_bound, ibp_residual_check, quotient_inner
from pklab.stein import (
    STEIN_K,
    MatrixTestField,
    ScalarField,
    build_V,
    gradient_norms,
    probe_points,
    recenter_solution,
    regularity_check,
    solve_stein,
    stein_residual,
    verify_poisson,
)
from pklab.zolotarev import default_theta_grid, stability_report, zol2_lower

from conftest import DELTAS, field_suite, h6_product, measure_suite, random_polynomial
from test_linalg_spectral import pencil_char_poly, polished_roots, random_spd
from test_stein import central_diff

# Ten admissible test functions -cos(theta . x)/|theta|^2.
COSINE_THETAS = [
    (1.3, -0.7), (0.5, 0.0), (0.0, 1.0), (2.0, 0.0), (1.0, 1.0),
    (-0.8, 1.6), (3.0, -1.0), (0.3, 0.4), (2.5, 2.5), (-1.2, -0.6),
]


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def cosine_battery():
    out = []
    for theta in COSINE_THETAS:
        f = ScalarField.cosine(theta)
        sol = solve_stein(f)
        g, sol_g = recenter_solution(f, sol)
        out.append((f, sol, build_V(sol_g)))
    return out


def test_criterion_01_gaussian_baseline(capsys):
    t0 = time.perf_counter()
    base = cpk_lower_bound(build_gauss_hermite(2, 8), 2).value
    others = [cpk_lower_bound(build_gauss_hermite(2, 2 * d + 2), d).value for d in (2, 3, 4, 5)]
    elapsed = time.perf_counter() - t0
    ok = abs(base - 1.0) <= 1e-8 and max(others) <= 1 + 1e-8 and elapsed < 10
    verdict(capsys, 1, ok, f"value={base!r} max(d=2..5)={max(others)!r} time={elapsed:.2f}s")


def test_criterion_02_candidate_certificate(capsys):
    worst_q = worst_s = worst_r = 0.0
    slowest = 0.0
    for name, mu in measure_suite().items():
        t0 = time.perf_counter()
        n = mu.dim
        for i, j in itertools.permutations(range(1, n + 1), 2):
            u = candidate_field(i, j, n)
            q = quotient_inner(u, u, mu)
            s2 = 2 * dirichlet_inner(u, u, mu)
            worst_q = max(worst_q, abs(q - 3))
            worst_s = max(worst_s, abs(s2 - 3))
            worst_r = max(worst_r, abs(q / s2 - 1))
        slowest = max(slowest, time.perf_counter() - t0)
    ok = worst_q <= 1e-10 and worst_s <= 1e-10 and slowest < 1.0
    verdict(capsys, 2, ok, f"|q-3|={worst_q:.2e} |2s-3|={worst_s:.2e} "
                           f"|rayleigh-1|={worst_r:.2e} slowest={slowest:.3f}s")


def test_criterion_03_lower_bound_law(capsys):
    lowest = math.inf
    worst_drop = 0.0
    for name, mu in measure_suite(m=10).items():
        degrees = (2, 3, 4) if mu.dim == 2 else (2, 3)
        vals = [cpk_lower_bound(mu, d).value for d in degrees]
        lowest = min(lowest, min(vals))
        worst_drop = max([worst_drop] + [lo - hi for lo, hi in zip(vals, vals[1:])])
    ok = lowest >= 1 - 1e-8 and worst_drop <= 1e-10
    verdict(capsys, 3, ok, f"min value={lowest!r} worst degree drop={worst_drop:.2e}")


def test_criterion_04_stein_solver(capsys, cosine_battery):
    worst = 0.0
    rng = np.random.default_rng(404)
    for n in (2, 3):
        probes = probe_points(n)
        polys = [Polynomial.monomial(e) for e in itertools.product(range(7), repeat=n)
                 if 1 <= sum(e) <= 6]
        polys += [random_polynomial(rng, n, d) for d in range(1, 7) for _ in range(4)]
        for p in polys:
            f = ScalarField.from_polynomial(p)
            worst = max(worst, verify_poisson(f, solve_stein(f), probes))
    x1, x2 = Polynomial.variable(0, 2), Polynomial.variable(1, 2)
    zero = Polynomial.zero(2)
    closed = [
        (x1, VectorField((Polynomial.constant(1.0, 2), zero))),
        (x1 * x1, VectorField((x1, zero))),
        (x1 * x2, VectorField((0.5 * x2, 0.5 * x1))),
    ]
    exact = all(solve_stein(ScalarField.from_polynomial(p)).field == phi for p, phi in closed)
    reg = [regularity_check(f, sol, probe_points(2)) for f, sol, _ in cosine_battery]
    lip = all(r.lipschitz_ok for r in reg)
    ok = worst <= 1e-10 and exact and lip
    verdict(capsys, 4, ok, f"max poisson residual={worst:.2e} closed forms exact={exact} "
                           f"max|grad phi|={max(r.max_grad_phi for r in reg):.4f} (<= 0.5)")


def test_criterion_05_exact_stein_identity(capsys):
    gamma = build_gauss_hermite(2, 10)
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        entries = tuple(tuple(random_polynomial(rng, 2, 3) for _ in range(2)) for _ in range(2))
        V = MatrixTestField.from_matrix_field(MatrixField(entries))
        worst = max(worst, stein_residual(V, gamma))
    verdict(capsys, 5, worst <= 1e-8, f"max residual over 20 fields={worst:.2e}")


def test_criterion_06_approximate_stein_identity(capsys, cosine_battery):
    worst_slack = math.inf
    lines = []
    for delta in DELTAS:
        c = cpk_lower_bound(h6_product(delta, 2, 10), 4).value
        mu = h6_product(delta, 2, 20)
        for f, _, V in cosine_battery:
            lhs = stein_residual(V, mu)
            rhs = STEIN_K * math.sqrt(c * (c - 1)) * float(np.sum(gradient_norms(V, mu))) + 1e-6
            worst_slack = min(worst_slack, rhs - lhs)
        lines.append(f"delta={delta}: c={c:.6f}")
    verdict(capsys, 6, worst_slack >= 0, f"min(rhs-lhs)={worst_slack:.3e}; " + ", ".join(lines))


def test_criterion_07_approximate_ibp(capsys):
    vs = field_suite(2, count=50)
    u = candidate_field(1, 2, 2)
    gamma = build_gauss_hermite(2, 10)
    gauss_lhs = max(ibp_residual_check(u, v, gamma, 1.0).lhs for v in vs)
    all_hold = True
    for delta in DELTAS:
        mu = h6_product(delta, 2, 10)
        c = cpk_lower_bound(mu, 4).value
        all_hold &= all(ibp_residual_check(u, v, mu, c).holds for v in vs)
    ok = gauss_lhs <= 1e-10 and all_hold
    verdict(capsys, 7, ok, f"gaussian max lhs={gauss_lhs:.2e}; hermite6 all hold={all_hold}")


def test_criterion_08_zolotarev_oracle(capsys):
    gamma = build_gauss_hermite(2, 10)
    grid = default_theta_grid(2)
    rel = max(abs(zol2_lower(h6_product(d), gamma, grid) / (16 * math.exp(-2) * d) - 1)
              for d in DELTAS)
    self_gap = zol2_lower(gamma, gamma, grid)
    ok = rel <= 0.02 and self_gap <= 1e-12
    verdict(capsys, 8, ok, f"max rel err vs 16e^-2 delta={rel:.2e}; gamma self gap={self_gap:.1e}")


def test_criterion_09_end_to_end(capsys, tmp_path):
    consistent = all(stability_report(h6_product(d), 4).consistent for d in DELTAS)
    cfg = cli.RunConfig(command="sweep", deltas=list(DELTAS), dim=2, degree=4, out=str(tmp_path))
    status = cli.run(cfg)
    rows = [line.split(",") for line in (tmp_path / "sweep.csv").read_text().splitlines()[1:]]
    slopes = [float(r[2]) / float(r[0]) for r in rows]
    spread = max(slopes) / min(slopes) - 1
    oracle = max(abs(s / (16 * math.exp(-2)) - 1) for s in slopes)
    nonneg = all(float(r[1]) - 1 >= 0 for r in rows)
    csv_ok = all(r[4] == "true" for r in rows) and len(rows) == 3
    ok = status == 0 and consistent and csv_ok and spread <= 0.02 and oracle <= 0.02 and nonneg
    verdict(capsys, 9, ok, f"consistent={consistent} slope spread={spread:.2e} "
                           f"slope vs oracle={oracle:.2e} cpk-1>=0: {nonneg}")


def test_criterion_10_numerical_hygiene(capsys, tmp_path, monkeypatch, cosine_battery):
    worst_eig = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        S = rng.normal(size=(3, 3))
        M, B = S + S.T, random_spd(rng, 3)
        ref = polished_roots(pencil_char_poly(M, B))
        lam, _ = generalized_eigh(M, B)
        worst_eig = max(worst_eig, float(np.max(np.abs(lam - ref) / np.maximum(1, np.abs(ref)))))

    pts = np.random.default_rng(1010).normal(size=(8, 2)) * 1.5
    worst_fd = 0.0
    for f, sol, V in cosine_battery[:4]:
        for fn, d in [(f.value, f.gradient), (f.gradient, f.hessian), (sol.phi, sol.jacobian),
                      (sol.jacobian, sol.hessian), (V.values, V.gradients)]:
            worst_fd = max(worst_fd, float(np.max(np.abs(central_diff(fn, pts) - d(pts)))))

    blobs = []
    for threads in ("1", "3", "1"):
        monkeypatch.setenv("PKLAB_THREADS", threads)
        out = tmp_path / f"run{len(blobs)}"
        cli.run(cli.RunConfig(command="sweep", deltas=list(DELTAS), dim=2, degree=4, out=str(out)))
        cli.run(cli.RunConfig(command="cpk", measure="product(hermite6(delta=0.008) x 2)",
                              degree=4, out=str(out)))
        blobs.append(b"".join((out / name).read_bytes()
                              for name in ("sweep.csv", "sweep.json", "cpk.json")))
    identical = blobs[0] == blobs[1] == blobs[2]
    ok = worst_eig <= 1e-12 and worst_fd <= 1e-6 and identical
    verdict(capsys, 10, ok, f"pencil err={worst_eig:.1e} finite-diff err={worst_fd:.1e} "
                            f"byte-identical={identical}")


def test_suite_measures_satisfy_moment_assumption():
    assert all(check_moments(mu).passes for mu in measure_suite().values())
