import csv
import json
import subprocess
import sys

import pytest

from pklab import cli
from pklab.errors import ConditioningError

SWEEP = ["sweep", "--family", "hermite6", "--deltas", "0.008,0.002,0.004", "--dim", "2",
         "--degree", "4"]


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def test_cpk_gaussian(tmp_path):
    assert run(tmp_path, "cpk", "--measure", "gaussian(dim=2)", "--degree", "2", "--m", "8") == 0
    rep = load(tmp_path / "cpk.json")
    assert rep["cpk_lower"] == pytest.approx(1.0, abs=1e-8)
    assert set(rep) >= {"measure_spec", "degree", "basis_size", "cpk_lower",
                        "witness_coeffs", "residuals"}


def test_moments_failure_exit_2(tmp_path, capsys):
    assert run(tmp_path, "moments", "--measure", "product(gaussian_var(2,1))") == 2
    rep = load(tmp_path / "moments.json")
    assert rep["moment_report"]["isotropy_residual"] == pytest.approx(1.0, abs=1e-12)
    assert not rep["moment_report"]["passes"]


def test_cpk_hypothesis_violation_exit_2(tmp_path, capsys):
    assert run(tmp_path, "cpk", "--measure", "product(gaussian_var(2,1))", "--degree", "2") == 2
    assert "moment" in capsys.readouterr().err


@pytest.mark.parametrize("spec,token", [
    ("gauss(dim=2)", "gauss"),
    ("product(hermite6(delta=0.05) x 2)", "0.05"),
])
def test_bad_spec_exit_1(tmp_path, capsys, spec, token):
    assert run(tmp_path, "cpk", "--measure", spec, "--degree", "2") == 1
    assert token in capsys.readouterr().err


@pytest.mark.parametrize("m", ["7", "4"])
def test_bad_nodes_per_axis_exit_1(tmp_path, m):
    assert run(tmp_path, "cpk", "--measure", "gaussian(dim=2)", "--degree", "2", "--m", m) == 1


def test_conditioning_failure_exit_3(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ConditioningError("forced")
    monkeypatch.setattr(cli, "cpk_lower_bound", boom)
    assert run(tmp_path, "cpk", "--measure", "gaussian(dim=2)", "--degree", "2") == 3


def test_sweep_csv(tmp_path):
    assert run(tmp_path, *SWEEP) == 0
    with open(tmp_path / "sweep.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["delta", "cpk_lower", "zol2_lower", "rhs", "consistent"]
    assert [float(r["delta"]) for r in rows] == [0.002, 0.004, 0.008]
    assert all(r["consistent"] == "true" for r in rows)
    assert all(float(r["cpk_lower"]) >= 1 - 1e-8 for r in rows)
    for r in rows:
        for key in ("delta", "cpk_lower", "zol2_lower", "rhs"):
            assert r[key] == format(float(r[key]), ".17g")
    assert load(tmp_path / "sweep.json")["rows"][0]["delta"] == 0.002


def test_sweep_is_byte_identical_across_threads(tmp_path, monkeypatch):
    outs = []
    for threads in ["1", "4", "1"]:
        monkeypatch.setenv("PKLAB_THREADS", threads)
        d = tmp_path / f"t{len(outs)}"
        assert run(d, *SWEEP) == 0
        outs.append(((d / "sweep.csv").read_bytes(), (d / "sweep.json").read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_stability_and_zol2(tmp_path):
    spec = "product(hermite6(delta=0.004) x 2)"
    assert run(tmp_path, "stability", "--measure", spec, "--degree", "4") == 0
    rep = load(tmp_path / "stability.json")
    assert rep["consistent"] is True
    assert set(rep) >= {"measure_spec", "degree", "cpk_lower", "zol2_lower", "rhs_constant",
                        "rhs", "consistent", "theta_grid"}
    assert run(tmp_path, "zol2", "--measure", spec) == 0
    assert load(tmp_path / "zol2.json")["zol2_lower"] == pytest.approx(rep["zol2_lower"], rel=1e-12)


def test_stein_report(tmp_path):
    assert run(tmp_path, "stein", "--f", "poly(x1*x2 + x1^3)") == 0
    rep = load(tmp_path / "stein.json")
    assert set(rep) >= {"f_spec", "solver_kind", "poisson_residual", "lipschitz_check",
                        "V_gradient_norms", "stein_residual"}
    assert rep["solver_kind"] == "hermite_spectral"
    assert rep["poisson_residual"] <= 1e-10
    assert rep["stein_residual"] <= 1e-8


def test_stein_bad_f(tmp_path, capsys):
    assert run(tmp_path, "stein", "--f", "sine(1,2)") == 1
    assert "sine" in capsys.readouterr().err


def test_reports_are_deterministic(tmp_path):
    args = ["cpk", "--measure", "product(hermite6(delta=0.008) x 2)", "--degree", "4"]
    assert run(tmp_path / "a", *args) == 0
    assert run(tmp_path / "b", *args) == 0
    assert (tmp_path / "a" / "cpk.json").read_bytes() == (tmp_path / "b" / "cpk.json").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "pklab", "moments", "--measure", "gaussian(dim=2)",
         "--out", str(tmp_path)],
        capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert load(tmp_path / "moments.json")["moment_report"]["passes"]
