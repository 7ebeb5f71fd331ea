import json

import pytest

from coarsehom.cli import main


@pytest.fixture
def line_spec(tmp_path):
    p = tmp_path / "line.json"
    p.write_text(json.dumps({"family": "zn", "radius": 8, "pipeline": {"windows": [4, 6, 8]}}))
    return p


@pytest.fixture
def reflect_spec(tmp_path):
    p = tmp_path / "refl.json"
    p.write_text(json.dumps({"family": "zn", "radius": 4, "action": "reflection"}))
    return p


def test_compute_writes_json_and_csv(line_spec, tmp_path):
    out = tmp_path / "report.json"
    assert main(["compute", "--spec", str(line_spec), "--ring", "Z", "--kind", "homology", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert [d["betti"] for d in rep["degrees"]] == [0, 1, 0]
    assert rep["tower"]["keys"] == [4, 6, 8]
    assert out.with_suffix(".csv").read_text().splitlines()[2] == "1,1,,0"


def test_compute_cohomology_stdout(line_spec, capsys):
    assert main(["compute", "--spec", str(line_spec), "--kind", "cohomology", "--windows", "4,6"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["kind"] == "cochain" and rep["degrees"][1]["betti"] == 1


def test_gate_rejects_twisted_action(tmp_path, capsys):
    p = tmp_path / "tw.json"
    p.write_text(json.dumps({"family": "zn", "radius": 3, "params": {"dim": 2}, "action": "twisted_shift",
                             "pipeline": {"windows": [2, 3]}}))
    assert main(["compute", "--spec", str(p), "--equivariant"]) == 2
    assert "rejected" in capsys.readouterr().err


def test_gate_rejects_non_permuting_action(tmp_path, capsys):
    p = tmp_path / "shift.json"
    p.write_text(json.dumps({"family": "zn", "radius": 3, "action": {"kind": "translation"}}))
    assert main(["compute", "--spec", str(p), "--equivariant"]) == 2
    assert "does not permute" in capsys.readouterr().err


def test_rips_exports(reflect_spec, capsys):
    assert main(["rips", "--spec", str(reflect_spec), "--level", "2", "--export", "dot"]) == 0
    assert capsys.readouterr().out.startswith("graph rips {")
    assert main(["rips", "--spec", str(reflect_spec), "--level", "1", "--export", "off"]) == 0
    assert capsys.readouterr().out.splitlines()[:2] == ["OFF", "9 8 0"]


def test_rips_cap(reflect_spec, monkeypatch, capsys):
    monkeypatch.setenv("COARSEHOM_CAP", "5")
    assert main(["rips", "--spec", str(reflect_spec), "--level", "2"]) == 3
    assert "COARSEHOM_CAP" in capsys.readouterr().err


def test_discretize(reflect_spec, capsys):
    assert main(["discretize", "--spec", str(reflect_spec), "--sep", "2", "--equivariant"]) == 0
    out = json.loads(capsys.readouterr().out)
    pts = set(out["points"])
    assert pts == {-p for p in pts}
    assert all(b in pts for _, b in out["projection"])


def test_verify_exit_codes(tmp_path, capsys):
    good = {"config": {"axioms": ["exactness"]}, "spaces": {"Z": {"family": "zn", "radius": 4}},
            "pairs": [{"space": "Z", "A": {"le": 0}}]}
    bad = {"config": {"axioms": ["excision"], "kinds": ["chain"]}, "spaces": {"Z": {"family": "zn", "radius": 4}},
           "triples": [{"space": "Z", "A": {"le": 0}, "B": {"ge": 1}}]}
    for name, suite in (("good", good), ("bad", bad)):
        (tmp_path / f"{name}.json").write_text(json.dumps(suite))
    assert main(["verify", "--suite", str(tmp_path / "good.json"), "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())
    assert main(["verify", "--suite", str(tmp_path / "bad.json")]) == 1
    assert "FAIL excision" in capsys.readouterr().out
