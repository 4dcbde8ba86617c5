import json
import os

import jsonschema
import numpy as np
import pytest

from pycmc import cli
from pycmc.cli import construct_args, run
from pycmc.config import Tolerances, config_from_dict, load_config
from pycmc.delaunay import DelaunayResidue, profile
from pycmc.exceptions import ConfigError
from pycmc.utils import load_json

VACUUM = {"residue": {"a_re": 0.25, "b_re": 0.25}}


def _write(tmp_path, raw, name="config.json"):
    path = tmp_path / name
    path.write_text(raw if isinstance(raw, str) else json.dumps(raw))
    return str(path)


def test_defaults_are_filled():
    config = config_from_dict(VACUUM)
    assert config.r == 1.0
    assert config.lam_sym == 1.0
    assert config.grid["nx"] == 64
    assert config.outputs["json"] == "summary.json"
    assert config.verify["n_target"] == 1
    assert config.tolerances == Tolerances()
    assert config.a == 0.25 and config.b == 0.25 and config.c == 0.0


def test_tolerances_from_dict():
    assert Tolerances.from_dict({"probe": 1e-6}).probe == 1e-6
    assert Tolerances.from_dict(None) == Tolerances()
    with pytest.raises(ConfigError):
        Tolerances.from_dict({"bogus": 1.0})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "{not json"))
    with pytest.raises(jsonschema.ValidationError):
        load_config(_write(tmp_path, {"residue": {"a_re": 0.25}}))
    with pytest.raises(jsonschema.ValidationError):
        load_config(_write(tmp_path, {**VACUUM, "r": 1.5}))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, {"residue": {"a_re": 0.0, "b_re": 0.25}}))


def test_construct_args():
    args = construct_args(["verify", "--config", "c.json", "--quiet"])
    assert args.command == "verify"
    assert args.config == "c.json"
    assert args.out_dir == "./output"
    assert args.threads == 1
    assert args.quiet
    with pytest.raises(SystemExit):
        construct_args(["unknown", "--config", "c.json"])


def test_run_rejects_invalid_config(tmp_path):
    out = str(tmp_path / "out")
    bad = _write(tmp_path, {"residue": {"a_re": 0.25}, "grid": {"nx": 1}})
    assert run(construct_args(["delaunay", "--config", bad, "--out-dir", out, "--quiet"])) == 2
    missing = str(tmp_path / "missing.json")
    assert run(construct_args(["delaunay", "--config", missing, "--out-dir", out, "--quiet"])) == 2


@pytest.mark.slow
def test_run_delaunay_vacuum(tmp_path):
    raw = {**VACUUM, "grid": {"x_min": -2.0, "x_max": 0.0, "nx": 12, "ny": 8}}
    out = str(tmp_path / "out")
    code = run(construct_args(["delaunay", "--config", _write(tmp_path, raw), "--out-dir", out, "--quiet"]))
    assert code == 0
    exp_path = os.path.join(out, "delaunay")
    for name in ("summary.json", "surface.obj", "report.csv", "log.txt"):
        assert os.path.exists(os.path.join(exp_path, name))
    summary = load_json(os.path.join(exp_path, "summary.json"))
    assert summary["passed"]
    assert summary["cylinder"]["radius"] == pytest.approx(0.5, rel=1e-6)
    assert summary["necksize"] == pytest.approx([0.5, 0.5])


def test_run_records_unexpected_errors(tmp_path, monkeypatch):
    def failing(config, exp_path, verbose=True):
        raise np.linalg.LinAlgError("SVD did not converge")

    monkeypatch.setitem(cli.COMMANDS, "delaunay", failing)
    out = str(tmp_path / "out")
    code = run(construct_args(["delaunay", "--config", _write(tmp_path, VACUUM), "--out-dir", out, "--quiet"]))
    assert code == 1
    summary = load_json(os.path.join(out, "delaunay", "summary.json"))
    assert not summary["passed"]
    assert summary["error"]["type"] == "LinAlgError"
    assert "SVD" in summary["error"]["message"]


def _perturbed_config(tmp_path, n_z=4):
    period = profile(DelaunayResidue(0.375, 0.125)).rho
    raw = {
        "residue": {"a_re": 0.375, "b_re": 0.125},
        "r": 0.5,
        "perturbation": [{"k": 1, "matrix": [[[0.01, 0.0], [0.02, 0.0]], [[0.03, 0.0], [-0.01, 0.0]]]}],
        "grid": {"x_min": -1.5 - period, "x_max": -1.5, "nx": 24, "ny": 8},
        "verify": {"z_min": 1e-3, "z_max": 1e-1, "n_z": n_z, "n_target": 1, "windows": 2, "growth_lambdas": 4},
    }
    return _write(tmp_path, raw)


def test_verify_stops_on_non_unitary_monodromy(tmp_path, monkeypatch):
    report = {"closing_error": 0.0, "sign": 1, "derivative": 0.0, "unitarity": 6.2e-2}
    report.update({"closed": True, "unitary": False})
    monkeypatch.setattr(cli.PotentialSource, "closing_report", lambda self, lam_sym=1.0: report)
    out = str(tmp_path / "out")
    code = run(construct_args(["verify", "--config", _perturbed_config(tmp_path), "--out-dir", out, "--quiet"]))
    assert code == 1
    summary = load_json(os.path.join(out, "verify", "summary.json"))
    assert not summary["passed"]
    assert summary["closing"]["unitarity"] == pytest.approx(6.2e-2)
    assert "frame_convergence" not in summary


@pytest.mark.slow
def test_run_verify_perturbed_unduloid(tmp_path):
    out = str(tmp_path / "out")
    code = run(construct_args(["verify", "--config", _perturbed_config(tmp_path), "--out-dir", out, "--quiet"]))
    assert code in (0, 1)
    exp_path = os.path.join(out, "verify")
    for name in ("summary.json", "convergence.csv", "growth.csv", "report.csv", "surface.obj"):
        assert os.path.exists(os.path.join(exp_path, name))
    summary = load_json(os.path.join(exp_path, "summary.json"))
    assert "error" not in summary
    assert summary["closing"]["unitary"]
    assert summary["frame_convergence"]["checks"]["monodromy_unitarity"] < 1e-8
    assert summary["growth"]["ok_tau"]
    assert len(summary["end_asymptotics"]["rows"]["window_k"]) == 1


@pytest.mark.slow
def test_run_dress_bubbleton(tmp_path):
    raw = {
        "residue": {"a_re": 0.25, "b_re": 0.25},
        "factors": [{"lam0": [0.07179676972449078, 0.0], "line": [[1.0, 0.0], [0.0, 0.5]]}],
        "grid": {"x_min": -2.0, "x_max": 0.0, "nx": 12, "ny": 8},
    }
    out = str(tmp_path / "out")
    code = run(construct_args(["dress", "--config", _write(tmp_path, raw), "--out-dir", out, "--quiet"]))
    summary = load_json(os.path.join(out, "dress", "summary.json"))
    assert "error" not in summary
    assert summary["round_trip"]["passed"]
    assert summary["round_trip"]["structure_residual"] < 1e-7
    assert summary["unitarity"] < 1e-9
    assert code == 0 and summary["passed"]
