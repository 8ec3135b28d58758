import json
import subprocess
import sys

import pytest

from l2approx.cli import main
from l2approx.grouprings import GroupRingMatrix, laurent
from l2approx.harness import strip_meta


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr().out


def test_quotient_json(capsys):
    code, out = run(capsys, "quotient", "--poly", "1,-2", "--stages", "1,2,4,64", "--moments", "3")
    doc = json.loads(out)
    assert code == 0 and doc["ok"]
    assert doc["stages"][2]["det"] == pytest.approx(15 ** 0.25)


def test_matrix_file_and_tsv(capsys, tmp_path):
    path = tmp_path / "a.json"
    path.write_text(GroupRingMatrix(laurent([-1, -1, 1]).group, [[laurent([-1, -1, 1])]]).dumps())
    code, out = run(capsys, "approx", "--scheme", "quotient", "--matrix", str(path), "--stages", "2:256",
                    "--format", "tsv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("index\tsize")
    assert float(lines[-1].split("\t")[5]) == pytest.approx(1.618034, abs=1e-3)


def test_folner(capsys):
    code, out = run(capsys, "folner", "--poly", "1,-2", "--stages", "1,2,3")
    assert code == 0
    assert all(s["det"] == pytest.approx(2) for s in json.loads(out)["stages"])


def test_regular_scheme_needs_finite_group(capsys):
    from l2approx.approx import SchemeError

    with pytest.raises(SchemeError):
        main(["approx", "--scheme", "regular", "--poly", "1,-2"])


def test_mahler_violation_exit_code(capsys):
    code, out = run(capsys, "mahler", "--poly", "1,-2", "--stages", "2,4")
    assert code == 1 and json.loads(out)["ok"] is False
    code, _ = run(capsys, "mahler", "--poly", "1,-2;1,-1,-1", "--stages", "1024,2048")
    assert code == 0


def test_reports_are_reproducible(capsys, tmp_path):
    argv = ["detconj-fuzz", "--samples", "30", "--seed", "5", "--out", str(tmp_path)]
    _, a = run(capsys, *argv)
    _, b = run(capsys, *argv)
    assert strip_meta(a) == strip_meta(b)
    assert (tmp_path / "detconj-fuzz.json").exists() and (tmp_path / "detconj-fuzz.tsv").exists()


@pytest.mark.parametrize("argv", [["torsion-demo"], ["counterexample", "--kmax", "5"], ["bernoulli-check"],
                                  ["transport-suite", "--samples", "8"]])
def test_suites_pass(capsys, argv):
    code, out = run(capsys, *argv)
    assert code == 0 and json.loads(out)["ok"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "l2approx.cli", "counterexample", "--kmax", "3", "--format", "tsv"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].split("\t")[:3] == ["k", "eps_sq_digits", "det"]


def test_missing_input(capsys):
    with pytest.raises(SystemExit):
        main(["quotient"])
