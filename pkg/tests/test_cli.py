import json

import numpy as np
import pytest

from minreg import cli
from minreg import io as mio
from minreg.errors import TrajectoryEscaped

from conftest import CASE_V, NETWORK2


def _net(tmp_path, rp, eps, name="net.json"):
    p = tmp_path / name
    p.write_text(json.dumps({"reactions": rp.to_json(), "epsilon": eps}))
    return str(p)


@pytest.fixture
def net2(tmp_path):
    return _net(tmp_path, NETWORK2, 0.5)


def test_classify_text(net2, capsys):
    assert cli.main(["classify", net2]) == 0
    out = capsys.readouterr().out
    assert out.startswith("case I\n") and "sink" in out and "source" in out


def test_classify_json_case_v(tmp_path, capsys):
    assert cli.main(["classify", _net(tmp_path, CASE_V, 0.1), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["case"] == "V" and doc["subcase"] == "a"
    assert doc["special"]["E"] == pytest.approx([0.141421, 0.070711], abs=1e-6)


@pytest.mark.parametrize("text, code", [
    ("{", 2),
    ('{"reactions": [{"reactant": [0, 0], "product": [1, 1]}, {"reactant": [1, 0], "product": [2, 1]}],'
     ' "epsilon": 0.5}', 3),
])
def test_classify_exit_codes(tmp_path, text, code, capsys):
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert cli.main(["classify", str(p)]) == code
    assert "minreg:" in capsys.readouterr().err


def test_missing_file_is_malformed(tmp_path):
    assert cli.main(["classify", str(tmp_path / "nope.json")]) == 2


def test_build_writes_artifacts_deterministically(net2, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["build", net2, "--out", str(a)]) == 0
    assert cli.main(["build", net2, "--out", str(b)]) == 0
    for ext in ("json", "csv", "svg"):
        assert (a / f"net.{ext}").read_bytes() == (b / f"net.{ext}").read_bytes()
    region, meta = mio.load_region(str(a / "net.json"))
    assert meta["config"]["epsilon"] == 0.5 and region.case.case == "I"


def test_build_epsilon_list(net2, tmp_path):
    assert cli.main(["build", net2, "--out", str(tmp_path), "--format", "json",
                     "--epsilon-list", "0.6,0.5"]) == 0
    assert (tmp_path / "net_eps0.6.json").exists() and (tmp_path / "net_eps0.5.json").exists()


def test_build_epsilon_too_large(tmp_path):
    assert cli.main(["build", _net(tmp_path, CASE_V, 0.99), "--out", str(tmp_path)]) == 4


def test_build_construction_failure(net2, tmp_path, monkeypatch):
    def boom(*a, **k):
        raise TrajectoryEscaped("escaped")

    monkeypatch.setattr(cli, "build_region", boom)
    assert cli.main(["build", net2, "--out", str(tmp_path)]) == 5


def test_simulate_pattern_reaches_corner(net2, capsys):
    assert cli.main(["simulate", net2, "--schedule", "pattern:ii", "--start", "1,1", "--time", "50"]) == 0
    rows = mio.read_csv(capsys.readouterr().out)
    assert rows[-1, 1:3] == pytest.approx([4.0, 4.0], abs=1e-6)
    assert rows[-1, 3:].tolist() == [2.0, 0.5, 2.0, 0.5]


def test_simulate_unit_rates(net2, capsys):
    assert cli.main(["simulate", net2, "--schedule", "constant:1,1,1,1", "--start", "10,10"]) == 0
    rows = mio.read_csv(capsys.readouterr().out)
    assert rows[-1, 1:3] == pytest.approx([1.0, 1.0], abs=1e-6)


def test_simulate_random_replays(net2, capsys):
    args = ["simulate", net2, "--schedule", "random:1", "--start", "2,2", "--time", "5", "--seed", "7"]
    cli.main(args)
    first = capsys.readouterr().out
    cli.main(args)
    assert capsys.readouterr().out == first


def test_simulate_out_of_box(net2):
    assert cli.main(["simulate", net2, "--schedule", "constant:3,1,1,1", "--start", "1,1"]) == 3


def test_bad_start_is_usage_error(net2):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", net2, "--schedule", "pattern:i", "--start", "1"])
    assert exc.value.code == 2


def test_verify_selected_suite(net2, capsys):
    assert cli.main(["verify", net2, "--suite", "corners"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(ln)["check"] for ln in lines] == ["corners"]


def test_verify_shrunken_region_fails(net2, tmp_path, capsys):
    cli.main(["build", net2, "--out", str(tmp_path), "--format", "json"])
    capsys.readouterr()
    assert cli.main(["verify", str(tmp_path / "net.json"), "--suite", "invariance", "--scale", "0.99"]) == 1
    rec = json.loads(capsys.readouterr().out)
    assert rec["check"] == "invariance" and rec["pass"] is False


def test_verify_seed_from_environment(net2, monkeypatch, capsys):
    monkeypatch.setenv("MINREG_SEED", "11")
    args = ["verify", net2, "--suite", "containment", "--samples", "4"]
    assert cli.main(args) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["seed"] == 11
    assert cli.main(args + ["--seed", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 5


def test_verify_writes_report(net2, tmp_path):
    assert cli.main(["verify", net2, "--suite", "eigen", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "report.jsonl").read_text().splitlines()
    assert len(lines) == 2  # one per sink corner


def test_steer(net2, tmp_path, capsys):
    assert cli.main(["steer", net2, "--start", "10,10", "--target", "1.5,2", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "schedule.json").read_text())
    assert doc["reached"] and doc["distance"] <= 1e-3
    rows = mio.read_csv((tmp_path / "trajectory.csv").read_text())
    assert np.linalg.norm(rows[-1, 1:3] - [1.5, 2.0]) <= 1e-3


def test_steer_outside_region(net2):
    assert cli.main(["steer", net2, "--start", "1,1", "--target", "10,10"]) == 1
