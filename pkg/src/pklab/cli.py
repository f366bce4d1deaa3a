"""Command line front end.

    pklab moments   --measure SPEC [--m M] [--out DIR]
    pklab cpk       --measure SPEC --degree D [--m M] [--out DIR]
    pklab stein     --f FSPEC [--measure SPEC] [--m M] [--degree D] [--out DIR]
    pklab zol2      --measure SPEC [--theta-grid GRID] [--out DIR]
    pklab stability --measure SPEC --degree D [--m M] [--theta-grid GRID] [--slack S] [--out DIR]
    pklab sweep     --family hermite6 --deltas D1,D2,... --dim N --degree D [--out DIR]

Exit codes: 0 success, 1 bad input, 2 moment assumption fails, 3 numerical
conditioning failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import ConditioningError, HypothesisError, PklabError, SpecError
from .measure import DEFAULT_MOMENT_TOL, MarginalSpec, check_moments, measure_record
from .polyfield import dirichlet_inner
from .spectral import cpk_lower_bound, quotient_inner
from .specs import MeasureBuilder, parse_deltas, parse_f_spec, parse_measure_spec, parse_theta_grid
from .stein import (
    approx_stein_bound,
    build_V,
    gradient_norms,
    probe_points,
    recenter_solution,
    regularity_check,
    solve_stein,
    stein_residual,
    verify_poisson,
)
from .zolotarev import DEFAULT_SLACK, stability_report, zol2_lower

log = logging.getLogger("pklab")

EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_CONDITIONING = 0, 1, 2, 3
COMMANDS = ("moments", "cpk", "stein", "zol2", "stability", "sweep")
DEFAULT_GRID = "log(0.25,8,64)"
SWEEP_COLUMNS = ("delta", "cpk_lower", "zol2_lower", "rhs", "consistent")


@dataclass
class RunConfig:
    command: str
    measure: Optional[str] = None
    degree: int = 4
    nodes_per_axis: Optional[int] = None
    theta_grid: str = DEFAULT_GRID
    out: str = "."
    slack: float = DEFAULT_SLACK
    deltas: List[float] = field(default_factory=list)
    dim: int = 2
    family: str = "hermite6"
    f: Optional[str] = None
    moment_tol: float = DEFAULT_MOMENT_TOL

    @property
    def m(self):
        return self.nodes_per_axis or 2 * self.degree + 2

    def validate(self):
        if self.command not in COMMANDS:
            raise SpecError(f"unknown command {self.command!r}", self.command)
        if self.command in ("cpk", "stability", "sweep"):
            if self.degree < 2:
                raise SpecError(f"degree={self.degree} must be >= 2", str(self.degree))
            if self.m % 2 or self.m < 2 * self.degree + 2:
                raise SpecError(
                    f"--m {self.m} must be even and >= 2*degree+2 = {2 * self.degree + 2}",
                    str(self.m))
        if self.command in ("moments", "cpk", "zol2", "stability") and not self.measure:
            raise SpecError("--measure is required", "--measure")
        if self.command == "stein" and not self.f:
            raise SpecError("--f is required", "--f")
        if self.command == "sweep":
            if self.family != "hermite6":
                raise SpecError(f"unknown sweep family {self.family!r}", self.family)
            if not self.deltas:
                raise SpecError("--deltas is required", "--deltas")


def dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, shortest round-trip floats."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, ensure_ascii=False) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _threads():
    try:
        return max(1, int(os.environ.get("PKLAB_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_moments(cfg: RunConfig, out: Path) -> int:
    builder = parse_measure_spec(cfg.measure)
    mu = builder.build(cfg.nodes_per_axis or 8)
    rec = measure_record(mu, cfg.moment_tol)
    rec["measure_spec"] = builder.to_spec()
    _write(out / "moments.json", dumps(rec))
    return EXIT_OK if rec["moment_report"]["passes"] else EXIT_HYPOTHESIS


def cpk_record(builder: MeasureBuilder, degree: int, m: int, moment_tol=DEFAULT_MOMENT_TOL) -> dict:
    mu = builder.build(m)
    est = cpk_lower_bound(mu, degree, moment_tol)
    s = dirichlet_inner(est.witness, est.witness, mu)
    q = quotient_inner(est.witness, est.witness, mu)
    return {
        "measure_spec": builder.to_spec(),
        "degree": degree,
        "m": m,
        "basis_size": est.basis_size,
        "cpk_lower": est.value,
        "multiplicity": est.multiplicity,
        "witness_coeffs": [float(c) for c in est.coeffs],
        "residuals": {
            "witness_rayleigh_gap": abs(q / (2.0 * s) - est.value),
            "moment_report": check_moments(mu, moment_tol).to_dict(),
        },
    }


def _cmd_cpk(cfg: RunConfig, out: Path) -> int:
    builder = parse_measure_spec(cfg.measure)
    _write(out / "cpk.json", dumps(cpk_record(builder, cfg.degree, cfg.m, cfg.moment_tol)))
    return EXIT_OK


def stein_record(f_spec: str, builder: MeasureBuilder, m: int, degree: Optional[int] = None) -> dict:
    n = builder.dim
    f = parse_f_spec(f_spec, n)
    sol = solve_stein(f)
    probes = probe_points(n)
    reg = regularity_check(f, sol, probes)
    g, sol_g = recenter_solution(f, sol)
    V = build_V(sol_g)
    mu = builder.build(m)
    norms = gradient_norms(V, mu)
    rec = {
        "f_spec": f_spec,
        "measure_spec": builder.to_spec(),
        "m": m,
        "solver_kind": sol.kind,
        "poisson_residual": verify_poisson(f, sol, probes),
        "recentered_poisson_residual": verify_poisson(g, sol_g, probes),
        "lipschitz_check": reg.to_dict(),
        "V_gradient_norms": norms.tolist(),
        "stein_residual": stein_residual(V, mu),
    }
    if degree is not None and check_moments(mu).passes:
        c = cpk_lower_bound(mu, degree).value
        rec["cpk_lower"] = c
        rec["approx_stein_bound"] = approx_stein_bound(V, mu, max(c, 1.0))
    return rec


def _cmd_stein(cfg: RunConfig, out: Path) -> int:
    builder = parse_measure_spec(cfg.measure or f"gaussian(dim={cfg.dim})")
    m = cfg.nodes_per_axis or 20
    degree = cfg.degree if cfg.measure else None
    _write(out / "stein.json", dumps(stein_record(cfg.f, builder, m, degree)))
    return EXIT_OK


def _cmd_zol2(cfg: RunConfig, out: Path) -> int:
    builder = parse_measure_spec(cfg.measure)
    m = cfg.nodes_per_axis or 10
    mu = builder.build(m)
    gamma = MeasureBuilder("gaussian", builder.dim).build(m)
    grid = parse_theta_grid(cfg.theta_grid, builder.dim)
    rec = {
        "measure_spec": builder.to_spec(),
        "zol2_lower": zol2_lower(mu, gamma, grid),
        "theta_grid": cfg.theta_grid,
        "theta_grid_size": len(grid),
    }
    _write(out / "zol2.json", dumps(rec))
    return EXIT_OK


def stability_record(builder: MeasureBuilder, degree: int, m: int, grid_spec: str, slack: float) -> dict:
    mu = builder.build(m)
    grid = parse_theta_grid(grid_spec, builder.dim)
    rep = stability_report(mu, degree, grid, slack)
    rec = rep.to_dict()
    rec["measure_spec"] = builder.to_spec()
    rec["theta_grid"] = grid_spec
    return rec


def _cmd_stability(cfg: RunConfig, out: Path) -> int:
    builder = parse_measure_spec(cfg.measure)
    rec = stability_record(builder, cfg.degree, cfg.m, cfg.theta_grid, cfg.slack)
    _write(out / "stability.json", dumps(rec))
    return EXIT_OK


def sweep_rows(cfg: RunConfig) -> List[dict]:
    deltas = sorted(cfg.deltas)

    def row(delta):
        builder = MeasureBuilder("product", cfg.dim,
                                 tuple(MarginalSpec.hermite6(delta) for _ in range(cfg.dim)))
        rec = stability_record(builder, cfg.degree, cfg.m, cfg.theta_grid, cfg.slack)
        return {"delta": delta, **{k: rec[k] for k in SWEEP_COLUMNS[1:]}}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(row, deltas))


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([format(r["delta"], ".17g"), format(r["cpk_lower"], ".17g"),
                    format(r["zol2_lower"], ".17g"), format(r["rhs"], ".17g"),
                    "true" if r["consistent"] else "false"])
    return buf.getvalue()


def _cmd_sweep(cfg: RunConfig, out: Path) -> int:
    for d in cfg.deltas:
        # Validates the range with the threshold in the message.
        parse_measure_spec(f"product(hermite6(delta={d!r}) x {cfg.dim})")
    rows = sweep_rows(cfg)
    _write(out / "sweep.csv", sweep_csv(rows))
    _write(out / "sweep.json", dumps({
        "family": cfg.family, "dim": cfg.dim, "degree": cfg.degree, "m": cfg.m,
        "theta_grid": cfg.theta_grid, "rows": rows,
    }))
    return EXIT_OK


_HANDLERS = {
    "moments": _cmd_moments,
    "cpk": _cmd_cpk,
    "stein": _cmd_stein,
    "zol2": _cmd_zol2,
    "stability": _cmd_stability,
    "sweep": _cmd_sweep,
}


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    try:
        cfg.validate()
        return _HANDLERS[cfg.command](cfg, Path(cfg.out))
    except SpecError as exc:
        print(f"pklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HypothesisError as exc:
        print(f"pklab: moment assumption violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConditioningError as exc:
        print(f"pklab: numerical conditioning failure: {exc}", file=sys.stderr)
        return EXIT_CONDITIONING
    except PklabError as exc:
        print(f"pklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def build_parser():
    p = argparse.ArgumentParser(prog="pklab", description="Poincare-Korn constant toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--measure")
        sp.add_argument("--degree", type=int, default=4)
        sp.add_argument("--m", type=int, dest="nodes_per_axis")
        sp.add_argument("--theta-grid", default=DEFAULT_GRID)
        sp.add_argument("--out", default=".")
        sp.add_argument("--slack", type=float, default=DEFAULT_SLACK)
        sp.add_argument("--dim", type=int, default=2)
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "sweep":
            sp.add_argument("--family", default="hermite6")
            sp.add_argument("--deltas", required=True)
        if name == "stein":
            sp.add_argument("--f", required=True, help="cosine(t1,...,tn) or poly(expr)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        deltas = parse_deltas(args.deltas) if getattr(args, "deltas", None) else []
    except SpecError as exc:
        print(f"pklab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cfg = RunConfig(
        command=args.command,
        measure=args.measure,
        degree=args.degree,
        nodes_per_axis=args.nodes_per_axis,
        theta_grid=args.theta_grid,
        out=args.out,
        slack=args.slack,
        deltas=deltas,
        dim=args.dim,
        family=getattr(args, "family", "hermite6"),
        f=getattr(args, "f", None),
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
