import json
import subprocess
import sys
from pathlib import Path

import pytest

from varpoly.cli import main

ROOT = Path(__file__).parent.parent
PROBLEMS = ROOT / "problems"
DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, json.loads(out), err


def test_analyze_abs(capsys):
    code, doc, _ = run(capsys, "analyze", PROBLEMS / "abs_v0.vp")
    assert code == 0 and doc["status"] == 0
    assert doc["verdicts"]["nondegenerate"] is True
    assert doc["verdicts"]["soqc"] is True
    assert doc["provenance"]["seed"] == 42
    assert doc["provenance"]["tolerances"]["act"] == 1e-9


def test_analyze_with_given_multiplier(capsys):
    code, doc, _ = run(capsys, "analyze", PROBLEMS / "twin_constraints.vp")
    assert code == 0
    assert doc["certificates"]["multiplier"] == [0.25, 0.75]
    assert doc["verdicts"]["unique_multiplier"] is False and doc["verdicts"]["soqc"] is False


def test_prox_soft_threshold(capsys):
    code, doc, _ = run(capsys, "prox", PROBLEMS / "soft_threshold.vp")
    assert code == 0
    row = doc["tables"]["r_values"][0]
    assert row["r"] == 0.5 and row["verdict"] == "notC1"
    assert abs(row["jump_location"][0] - 0.5) <= 1e-3
    assert abs(row["probe_discontinuity"] - 1.0) <= 0.05


def test_geneq_circle(capsys):
    code, doc, _ = run(capsys, "geneq", PROBLEMS / "circle.vp")
    assert code == 0
    assert doc["verdicts"]["smr"] is True and doc["verdicts"]["mr"] is True
    assert doc["certificates"]["sigma_jacobian"] == [[0.0, 0.0], [0.0, 0.5]]


def test_subderiv_and_csv(capsys, tmp_path):
    csv_path = tmp_path / "q.csv"
    code, doc, _ = run(capsys, "subderiv", PROBLEMS / "abs_quadratic.vp", "--csv", csv_path)
    assert code == 0 and doc["verdicts"]["all_agree"] is True
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,w_prime,quotient" and len(lines) > 10
    assert doc["verdicts"]["value_closeness_assumed"] is False


def test_subderiv_flags_missing_soqc(capsys):
    code, doc, _ = run(capsys, "subderiv", PROBLEMS / "twin_constraints.vp")
    assert code == 0
    assert doc["verdicts"]["value_closeness_assumed"] is True
    assert doc["verdicts"]["all_agree"] is None
    inward = doc["tables"]["directions"][1]
    assert inward["w"] == [-1.0] and inward["d2"] is None
    assert inward["d2_level_minima"][0] == pytest.approx(16.0)


def test_epi(capsys, tmp_path):
    code, doc, _ = run(capsys, "epi", PROBLEMS / "abs_v0.vp", "--csv", tmp_path / "e.csv")
    assert code == 0
    assert doc["verdicts"]["status"] == "consistent"
    assert doc["verdicts"]["pattern"] == "convergent"


def test_out_file(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert main(["analyze", str(PROBLEMS / "abs_v0.vp"), "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["command"] == "analyze"


def test_tol_override(capsys):
    code, doc, _ = run(capsys, "analyze", PROBLEMS / "abs_v0.vp", "--tol", "act=1e-8", "--tol", "ri=1e-7")
    assert code == 0
    assert doc["provenance"]["tolerances"]["act"] == 1e-8
    assert doc["provenance"]["tolerances"]["ri"] == 1e-7


@pytest.mark.parametrize("argv, code", [
    (["analyze", DATA / "bad_syntax.vp"], 2),
    (["analyze", DATA / "missing.vp"], 2),
    (["analyze", PROBLEMS / "abs_v0.vp", "--tol", "bogus=1"], 2),
    (["analyze", PROBLEMS / "abs_v0.vp", "--tol", "act"], 2),
    (["geneq", PROBLEMS / "nlp.vp"], 2),
    (["prox", DATA / "bad_r.vp"], 3),
    (["analyze", DATA / "not_subgradient.vp"], 3),
    (["analyze", DATA / "bad_lambda.vp"], 3),
    (["analyze", DATA / "overflow.vp"], 4),
])
def test_exit_codes(capsys, argv, code):
    got, doc, err = run(capsys, *argv)
    assert got == code and doc["status"] == code
    assert "error" in doc and err.startswith("varpoly: ")
    if code == 3:
        assert err.strip() == f"varpoly: precondition failed: {doc['error']['precondition']}"


def test_deterministic_output(tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"{i}.json"
        main(["subderiv", str(PROBLEMS / "nlp.vp"), "--out", str(path), "--csv", str(tmp_path / f"{i}.csv")])
        outs.append((path.read_bytes(), (tmp_path / f"{i}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_float_format(capsys):
    main(["analyze", str(PROBLEMS / "abs_v0.vp")])
    text = capsys.readouterr().out
    assert '"gamma_bar": 1.000000000000e+00' in text
    assert text.index('"certificates"') < text.index('"command"') < text.index('"verdicts"')


def test_console_script():
    exe = Path(sys.executable).parent / "varpoly"
    cmd = [str(exe)] if exe.exists() else [sys.executable, "-m", "varpoly.cli"]
    res = subprocess.run(cmd + ["prox", str(DATA / "bad_r.vp")], capture_output=True, text=True)
    assert res.returncode == 3
    assert "prox_parameter" in res.stderr
