import json

import numpy as np
import pytest

from lipfree import acceptance
from lipfree.cli import main
from lipfree.qmetric import integer_segment, random_space, save_space


def write_molecule(tmp_path, space, coeffs, ref="space.json"):
    save_space(space, tmp_path / "space.json")
    path = tmp_path / "mol.json"
    path.write_text(json.dumps({"space": ref, "coeffs": list(coeffs)}))
    return path


def test_norm_elementary_two_points(tmp_path, capsys):
    mol = write_molecule(tmp_path, integer_segment(1, 0.5), [-1.0, 1.0])
    assert main(["norm", "--molecule", str(mol)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(1.0)
    assert out["lower"] <= out["value"] <= out["upper"] + 1e-12


def test_norm_segment_delta_coordinates(tmp_path, capsys):
    mol = write_molecule(tmp_path, integer_segment(5, 0.5), [0, 0, 0, 0, 1.0])
    assert main(["norm", "--molecule", str(mol)]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(5.0)


def test_norm_explicit_space_flag(tmp_path, capsys):
    mol = write_molecule(tmp_path, integer_segment(2, 1.0), [0, 1.0], ref="missing.json")
    assert main(["norm", "--space", str(tmp_path / "space.json"), "--molecule", str(mol)]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(2.0)


def test_norm_cap_exit_code(tmp_path, capsys):
    sp = random_space(np.random.default_rng(0), 12, 0.5)
    mol = write_molecule(tmp_path, sp, np.r_[np.ones(11)])
    assert main(["norm", "--molecule", str(mol), "--method", "enumerate"]) == 3
    assert "bounds_only" in capsys.readouterr().err
    assert main(["norm", "--molecule", str(mol), "--method", "bounds_only"]) == 0


def test_norm_invalid_input(tmp_path, capsys):
    mol = write_molecule(tmp_path, integer_segment(2), [1.0, 1.0, 1.0])
    assert main(["norm", "--molecule", str(mol)]) == 2
    assert "sum" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"p": 1.0, "dist": [[0, 1, 3], [1, 0, 1], [3, 1, 0]]}))
    mol = tmp_path / "m.json"
    mol.write_text(json.dumps({"space": "bad.json", "coeffs": [0, 1]}))
    assert main(["norm", "--molecule", str(mol)]) == 2


def test_verify_bases_suite(tmp_path, capsys):
    assert main(["verify", "--suite", "bases", "--p", "1/2,1", "--out", str(tmp_path), "--workers", "1"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == len(acceptance.SUITES["bases"])
    rows = (tmp_path / "bases_report.csv").read_text().splitlines()
    assert rows[0] == "criterion,instance,p,bound,measured,margin,status"
    assert all(r.endswith(",pass") for r in rows[1:])


def test_verify_norms_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["verify", "--suite", "norms", "--out", str(a), "--workers", "1"]) == 0
    assert main(["verify", "--suite", "norms", "--out", str(b), "--workers", "2"]) == 0
    assert (a / "norms_report.csv").read_bytes() == (b / "norms_report.csv").read_bytes()


def test_verify_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# quick run\nsuite = qmetric\nseed = 7\nworkers = 1\n")
    assert main(["verify", "--config", str(cfg)]) == 0
    assert "(qmetric)" in capsys.readouterr().out
    cfg.write_text("colour = blue\n")
    assert main(["verify", "--config", str(cfg)]) == 2


def test_verify_rejects_bad_p(capsys):
    assert main(["verify", "--suite", "bases", "--p", "2"]) == 2


def test_failing_row_reported(tmp_path, capsys):
    # a negative tolerance makes even exact rows fail, exercising the failure path
    assert main(["verify", "--suite", "qmetric", "--tolerance", "-1", "--workers", "1"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL]" in out and "failing row" in out


def test_all_suite_lists_every_criterion(tmp_path, capsys):
    assert main(["verify", "--suite", "all", "--out", str(tmp_path), "--workers", "4"]) == 0
    summary = json.loads((tmp_path / "all_summary.json").read_text())
    assert [c["id"] for c in summary["criteria"]] == list(range(1, 15))
    assert "summary: 14 passed, 0 failed" in capsys.readouterr().out
