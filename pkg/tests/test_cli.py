import csv
import io
import json

import pytest

from cpmm import cli, maps


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def test_classify_boundary(capsys):
    code, doc = run_json(capsys, "classify", "--family", "boundary_n:1,1,3")
    assert code == 0
    assert doc["class"] == "strongly_recurrent" and doc["confidence"] == "exact"
    assert doc["lambda_symbolic"] == "3*sqrt(2)/2"
    assert doc["lambda_value"] == pytest.approx(2.12132034356, abs=1e-10)
    assert len(doc["input_hash"]) == 64 and doc["options"]["family"] == "boundary_n:1,1,3"


def test_entropy_banded(capsys):
    code, doc = run_json(capsys, "entropy", "--family", "banded_z:1,1", "--schedule", "25,100,400")
    assert code == 0
    assert float(doc["lambda_estimate"]) == pytest.approx(2, abs=1e-3)


def test_gallery_bt12_expected(capsys):
    code, doc = run_json(capsys, "gallery", "--name", "bt12", "--params", "lambda=4", "--expected")
    assert code == 0
    assert doc["expected"]["class"] == "transient" and doc["expected"]["entropy"] == "log 4"


def test_gallery_list(capsys):
    code, doc = run_json(capsys, "gallery", "--list")
    assert code == 0 and set(maps.GALLERY) <= set(json.dumps(doc).replace('"', " ").split())


def test_output_is_deterministic(capsys):
    a = run(capsys, "classify", "--family", "tent_sequence:A:2", "--numeric", "--horizon", "150")
    b = run(capsys, "classify", "--family", "tent_sequence:A:2", "--numeric", "--horizon", "150")
    assert a == b


def test_same_input_same_hash(capsys, tmp_path):
    _, g = run(capsys, "gallery", "--name", "tent")
    p = tmp_path / "tent.json"
    p.write_text(g)
    _, d1 = run_json(capsys, "classify", "--map", str(p))
    _, d2 = run_json(capsys, "classify", "--map", str(p))
    assert d1["input_hash"] == d2["input_hash"]
    _, d3 = run_json(capsys, "classify", "--family", "boundary_n:1,1,3")
    assert d3["input_hash"] != d1["input_hash"]


def test_gallery_output_feeds_other_commands(capsys, tmp_path):
    p = tmp_path / "tent.json"
    assert cli.main(["gallery", "--name", "tent", "--out", str(p)]) == 0
    code, doc = run_json(capsys, "classify", "--map", str(p))
    assert code == 0 and doc["class"] == "strongly_recurrent"
    q = tmp_path / "pert.json"
    assert cli.main(["perturb", "--map", str(p), "--element", "1", "--order", "2", "--out", str(q)]) == 0
    pert = json.loads(q.read_text())
    assert pert["advisor"]["recommendation"] == maps.CERTIFIED
    code, paths_doc = run_json(capsys, "paths", "--map", str(q), "--i", "1", "--j", "1",
                               "--kind", "f", "--horizon", "6")
    assert code == 0


def test_paths_csv(capsys):
    code, out = run(capsys, "paths", "--family", "banded_z:1,1", "--i", "0", "--j", "0",
                    "--kind", "f", "--horizon", "6", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["n", "value"]
    assert [r[1] for r in rows[1:]] == ["0", "0", "2", "0", "2", "0", "4"]


def test_eigsolve(capsys):
    code, doc = run_json(capsys, "eigsolve", "--family", "bt12", "--lambda", "4")
    assert code == 0 and doc["verify"]["passed"]
    assert doc["summability"]["verdict"] == "yes"


def test_linearize_writes_sample(capsys, tmp_path):
    p = tmp_path / "a2.json"
    assert cli.main(["gallery", "--name", "tent_A", "--params", "ell=2", "--out", str(p)]) == 0
    out = tmp_path / "lin.json"
    assert cli.main(["linearize", "--map", str(p), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert 3 < float(doc["constant_slope_map"]["slope"]) < 4
    assert doc["max_slope_deviation"] <= 1e-9
    assert out.with_suffix(".csv").exists()


def test_linearize_refusal_exits_one(capsys, tmp_path):
    p = tmp_path / "k.json"
    assert cli.main(["gallery", "--name", "kmap", "--out", str(p)]) == 0
    code, _ = run(capsys, "linearize", "--map", str(p))
    assert code == 1


def test_identities_random_and_seedless(capsys):
    code, doc = run_json(capsys, "identities", "--random", "5", "--seed", "3")
    assert code == 0
    code, _ = run(capsys, "identities", "--random", "5", "--seed", "3", "--seedless")
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["classify"],
    ["classify", "--family", "boundary_n:1,1,3", "--matrix", "x.json"],
    ["classify", "--family", "golden:1"],
    ["classify", "--family", "boundary_n:1,1"],
    ["eigsolve", "--family", "bt12"],
    ["gallery", "--name", "bt12", "--params", "lambda=3"],
    ["gallery", "--name", "tent", "--params", "colour=red"],
    ["nonsense"],
    ["paths", "--family", "banded_z:1,1", "--i", "0", "--j", "0", "--horizon", "-2"],
])
def test_errors_exit_one(capsys, argv):
    assert cli.main(argv) == 1


def test_bad_map_json_exits_one(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"name": "m", "partition": {"exceptional": [[0, "1/2"], ["1/2", 1]],
                                                         "tail": None},
                             "branches": {"rule": {"kind": "explicit",
                                                   "params": [[{"image": [0, "3/4"]}],
                                                              [{"image": [0, 1]}]]}}}))
    assert cli.main(["classify", "--map", str(p)]) == 1
    assert capsys.readouterr().err


def test_unconverged_entropy_exits_two(capsys):
    code, doc = run_json(capsys, "entropy", "--family", "banded_z:1,1", "--schedule", "5,6",
                         "--tol", "1e-9")
    assert code == 2 and doc["status"] == 2 and doc["converged"] is False
