import json

import pytest

from silab import cli


def _run(argv, capsys):
    code = cli.run(argv)
    return code, capsys.readouterr()


def test_simulate_json(capsys):
    code, out = _run(["simulate", "--seed", "1", "--mesh", "0.1"], capsys)
    assert code == 0
    rep = json.loads(out.out)
    assert rep["Y"][0] == 0.0 and len(rep["theta"]) == 11
    assert rep["config"]["seed"] == 1


def test_simulate_csv_and_field(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert cli.run(["simulate", "--seed", "1", "--mesh", "0.1", "--format", "csv", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "alpha,theta,Y"
    code, res = _run(["simulate", "--field", "--grid", "4", "--seed", "2", "--format", "csv"], capsys)
    assert code == 0 and len(res.out.strip().splitlines()) == 4


def test_lattice_command(tmp_path, capsys):
    sets = tmp_path / "sets.json"
    sets.write_text(json.dumps({"dim": 2, "sets": [[1, 3], [2, 2]]}))
    code, out = _run(["lattice", "--in", str(sets), "--mesh", "0.5"], capsys)
    assert code == 0
    rep = json.loads(out.out)
    assert rep["numbering"] == [[1.0, 2.0], [1.0, 3.0], [2.0, 2.0]]
    assert [c["measure"] for c in rep["cells"]] == [2.0, 1.0, 2.0]
    assert rep["total"] == 5.0


def test_usage_errors(tmp_path, capsys):
    assert cli.run(["simulate", "--replicates", "-1", "--seed", "1"]) == 2
    assert cli.run(["nonsense"]) == 2
    assert cli.run(["lattice", "--seed", "1"]) == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("unknown_key = 3\n")
    assert cli.run(["simulate", "--config", str(cfg)]) == 2
    assert cli.run(["lattice", "--in", str(tmp_path / "missing.json"), "--seed", "1"]) == 3
    capsys.readouterr()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# example\nseed = 5\nmesh = 0.2\n")
    code, out = _run(["simulate", "--config", str(cfg), "--mesh", "0.5"], capsys)
    rep = json.loads(out.out)
    assert code == 0 and rep["config"]["seed"] == 5 and rep["config"]["mesh"] == 0.5


def test_missing_seed_is_recorded(capsys, caplog):
    code, out = _run(["simulate", "--mesh", "0.5"], capsys)
    assert code == 0
    assert isinstance(json.loads(out.out)["config"]["seed"], int)
    assert "no --seed" in caplog.text


def test_mc_hit_and_replay(tmp_path, capsys):
    path = tmp_path / "hit.json"
    code = cli.run(["mc", "hit", "--a", "1", "--n", "5000", "--seed", "3", "--out", str(path)])
    assert code == 0
    rep = json.loads(path.read_text())
    assert rep["test"] == "mc_hit" and rep["verdict"] == "pass"
    assert cli.run(["replay", str(path), "--workers", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["identical"] is True
    rep["estimate"] += 1e-12
    path.write_text(json.dumps(rep))
    assert cli.run(["replay", str(path)]) == 1


def test_verify_negative_control_verdict(capsys):
    code, out = _run(["verify", "bm", "--model", "common", "--lattices", "2", "--n", "10", "--seed", "1"], capsys)
    rep = json.loads(out.out)
    assert rep["test"] == "bm_control" and code == (0 if rep["verdict"] == "pass" else 1)


def test_diag_report_only(capsys):
    code, out = _run(["diag", "lil", "--n", "50", "--seed", "1"], capsys)
    rep = json.loads(out.out)
    assert code == 0 and rep["verdict"] == "report-only"


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        cli.run(["--help"])
    assert exc.value.code == 0
