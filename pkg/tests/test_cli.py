"""Scenario loading and the command-line front end."""

import json

import pytest

from spindex.cli import main
from spindex.scenarios import BUILTIN, ScenarioError, load, validate


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_builtin_scenarios_validate(name):
    scn = load(name)
    assert scn.name == name
    assert validate(scn.config) == []
    scn.hamiltonian()


def test_schema_errors_carry_line_numbers(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "hamiltonian": {"kind": "rotation", "params": {"alpha": 0.3}},\n'
                   '  "glue": {\n    "tau": 2.0\n  }\n}\n')
    assert main(["validate", str(bad)]) == 2
    out = capsys.readouterr().out
    assert "line 4" in out and "tau" in out
    with pytest.raises(ScenarioError):
        load(bad)


def test_range_checks():
    diags = validate({"hamiltonian": {"kind": "rotation", "params": {"alpha": 1.5}},
                      "census": {"grid": [8, 8]}})
    assert any("alpha" in d for d in diags) and any("grid" in d for d in diags)
    assert validate({"hamiltonian": {"kind": "rotation"}, "census": {"newton_tol": 1e-6}})


def test_run_writes_deterministic_outputs(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--scenario", "rotation-sqrt2", "--out", str(a), "--threads", "1"]) == 0
    assert main(["run", "--scenario", "rotation-sqrt2", "--out", str(b), "--threads", "1"]) == 0
    for f in ("report.json", "census.csv", "phase.svg"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    report = json.loads((a / "report.json").read_text())
    assert report["schema_version"] == "1.0"
    assert report["scenario"]["hamiltonian"]["params"]["alpha"] == pytest.approx(2 ** 0.5 - 1)
    assert report["resonance"]["two_point"]["passed"]
    assert report["passed"]


def test_continuum_skips_resonance(tmp_path):
    assert main(["run", "--scenario", "rotation-third", "--out", str(tmp_path), "--threads", "1"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["census"]["continuum_flag"]
    assert "skipped" in report["resonance"]


def test_missing_scenario_is_a_schema_error(tmp_path):
    assert main(["sphere", "--scenario", str(tmp_path / "nope.json")]) == 2


def test_index_and_resonance_commands(capsys):
    assert main(["index", "--rotation", "1.2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["mu"] == 1 and rep["delta"] == pytest.approx(1.2)
    golden = (5 ** 0.5 - 1) / 2
    assert main(["resonance", str(2 * golden), str(4 - 2 * golden)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["resonances"]["vectors"] == [[1, 1]]
    assert out["generator_bound"]["passed"]
