import json
import math
import os
import subprocess
from pathlib import Path

import numpy as np
import pytest

import driftfb

CLI = os.environ.get("DRIFTFB_CLI")
CONFIGS = Path(os.environ.get("DRIFTFB_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))


def test_closed_forms():
    assert driftfb.gamma_exponent(0.0) == pytest.approx(0.5)
    assert driftfb.gamma_exponent(1.0) == pytest.approx(0.75)
    for b in (-3.0, -0.5, 0.0, 2.0):
        g = driftfb.gamma_exponent(b)
        assert driftfb.solve_exponent_root(b) == pytest.approx(g, abs=1e-12)
        assert abs(driftfb.power_multiplier(g, b)) < 1e-12
    assert driftfb.normalization_constant(1) == pytest.approx(1 / math.pi, rel=1e-12)
    assert driftfb.chi(2, [0.6, 0.8]) == pytest.approx(1.0, abs=1e-10)
    assert driftfb.tilde_gamma([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.5)


def test_oracle_matches_normalized_coefficient():
    for beta in (0.25, 0.75):
        v = driftfb.half_laplacian_power_oracle(beta, 2.0)
        assert v == pytest.approx(driftfb.power_image_coefficient(beta, 0.0) * 2.0 ** (beta - 1), rel=1e-8)


def test_solve_bump_1d():
    r = driftfb.solve_bump(h=1 / 64, R=8, b=[1.0])
    assert r["converged"]
    u, phi, contact = r["u"], r["phi"], r["contact"]
    assert u.shape == phi.shape == contact.shape == r["x"].shape
    assert np.all(u - phi >= -1e-12)
    assert contact.any()
    assert r["complementarity"] <= 1e-10
    sides = sorted(p["normal"][0] for p in r["free_boundary"])
    assert sides == [-1.0, 1.0]


def test_bad_config_raises():
    with pytest.raises(ValueError):
        driftfb.run_config("scenario = nonsense\n")


def test_run_config_writes_report(tmp_path):
    r = driftfb.run_config_file(CONFIGS / "c01_exponent_roots.cfg", out=tmp_path)
    assert r["status"] == "pass" and r["exit_code"] == 0
    assert len(r["tables"]["roots"]) == 101
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["scenario"] == "verify-identity"
    assert (tmp_path / "roots.csv").read_text().startswith("b,root,gamma")


@pytest.mark.skipif(not CLI, reason="CLI path not provided")
@pytest.mark.parametrize(
    "args, code",
    [
        (["verify-identity", "--config", "c01_exponent_roots.cfg"], 0),
        (["verify-identity", "--config", "examples/identity_quarter.cfg"], 1),
        (["convergence", "--config", "examples/guardrail.cfg"], 2),
        (["chi", "--config", "c01_exponent_roots.cfg"], 2),
        (["solve", "--config", "examples/stalled_solver.cfg"], 3),
    ],
)
def test_cli_exit_codes(tmp_path, args, code):
    args = [a if not a.endswith(".cfg") else str(CONFIGS / a) for a in args]
    env = dict(os.environ, DRIFTFB_OUT=str(tmp_path / "out"))
    p = subprocess.run([CLI, *args], capture_output=True, text=True, env=env)
    assert p.returncode == code, p.stdout + p.stderr
    if code in (0, 1, 3):
        assert (tmp_path / "out" / "manifest.json").exists()


@pytest.mark.skipif(not CLI, reason="CLI path not provided")
def test_cli_csv_is_deterministic(tmp_path):
    cfg = str(CONFIGS / "examples" / "sweep_three_drifts.cfg")
    for d in ("a", "b"):
        subprocess.run([CLI, "sweep-drift", "--config", cfg, "--out", str(tmp_path / d), "--workers", "2"], check=True,
                       capture_output=True)
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert names
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
