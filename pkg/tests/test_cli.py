import csv
import json
import xml.etree.ElementTree as ET

import pytest

from hopflax import cli
from hopflax.scenario import builtin, serialize


@pytest.fixture(scope="module")
def triangle_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    status = cli.main(["run", "--builtin", "triangle_time", "--out", str(out),
                       "--snapshots", "0,1.25,2.5,3.75,5", "--svg", "--quiet"])
    return status, out


def test_run_happy_path(triangle_run):
    status, out = triangle_run
    assert status == cli.EXIT_OK
    for name in ("trajectories.csv", "summary.json", "timing.json"):
        assert (out / name).is_file()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is True
    for key in ("value", "iterations", "goal_cost", "formation_cost", "rollout_residual", "arrival_time"):
        assert key in summary
    assert "wall_clock_seconds" in json.loads((out / "timing.json").read_text())


def test_trajectory_table(triangle_run):
    _, out = triangle_run
    with open(out / "trajectories.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time", "agent", "x1", "x2", "x3", "p1", "p2", "p3"]
    body = rows[1:]
    assert len(body) == 101 * 3
    assert body[0][0] == "0.0" and body[-1][0] == "8.0"
    assert {r[1] for r in body} == {"left", "middle", "right"}
    # isotropic agents leave the heading columns empty; values round-trip exactly
    assert body[0][4] == "" and body[0][7] == ""
    for r in body[:30]:
        for cell in r[2:4] + r[5:7]:
            assert repr(float(cell)) == cell


def test_snapshots_are_svg(triangle_run):
    _, out = triangle_run
    svgs = sorted(out.glob("*.svg"))
    assert len(svgs) == 5
    for path in svgs:
        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg")
        circles = root.findall(".//{http://www.w3.org/2000/svg}circle")
        assert len(circles) >= 1 + 3 + 3  # obstacle, goals, agents


def test_svg_default_times(tmp_path):
    status = cli.main(["run", "--builtin", "square_hetero", "--out", str(tmp_path), "--svg", "--max-iter", "5", "--quiet"])
    assert status == cli.EXIT_NOT_CONVERGED
    assert len(list(tmp_path.glob("*.svg"))) == 5
    root = ET.parse(sorted(tmp_path.glob("*.svg"))[0]).getroot()
    assert len(root.findall(".//{http://www.w3.org/2000/svg}polygon")) == 2  # the two cars


def test_outputs_byte_identical(tmp_path):
    args = ["run", "--builtin", "moving_obstacles", "--max-iter", "150", "--quiet", "--svg"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == cli.EXIT_NOT_CONVERGED
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == cli.EXIT_NOT_CONVERGED
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "timing.json")
    assert "trajectories.csv" in names and "summary.json" in names
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_override_changes_result(tmp_path):
    base = ["run", "--builtin", "triangle_time", "--max-iter", "20", "--quiet"]
    cli.main(base + ["--out", str(tmp_path / "a")])
    cli.main(base + ["--out", str(tmp_path / "b"), "--seed", "99"])
    assert (tmp_path / "a" / "trajectories.csv").read_bytes() != (tmp_path / "b" / "trajectories.csv").read_bytes()


def test_scenario_file(tmp_path):
    path = tmp_path / "tri.yaml"
    path.write_text(serialize(builtin("triangle_time")))
    status = cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o"), "--max-iter", "3", "--quiet"])
    assert status == cli.EXIT_NOT_CONVERGED
    assert (tmp_path / "o" / "summary.json").is_file()


def test_invalid_scenario_reports_field(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("schema_version: 1\nhorizon: 1\nagents:\n  - {model: isotropic, start: [0, 0], goal: [1]}\n")
    status = cli.main(["run", "--scenario", str(path), "--out", str(tmp_path / "o")])
    assert status == cli.EXIT_INVALID
    assert "agents[0].goal" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["run", "--builtin", "nope"],
        ["run", "--builtin", "triangle_time", "--scenario", "x.yaml"],
        ["run", "--builtin", "triangle_time", "--snapshots", "1,abc", "--svg"],
        ["run", "--builtin", "triangle_time", "--snapshots", "1,2"],
        ["run", "--builtin", "triangle_time", "--max-iter", "0"],
        ["run", "--scenario", "/nonexistent/scenario.yaml"],
        ["compare", "--builtin", "triangle_time"],
        ["frobnicate"],
    ],
)
def test_bad_arguments(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_bad_thread_setting(monkeypatch, tmp_path):
    monkeypatch.setenv("HOPFLAX_THREADS", "zero")
    assert cli.main(["run", "--builtin", "triangle_time", "--out", str(tmp_path)]) == cli.EXIT_USAGE


def test_write_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    status = cli.main(["run", "--builtin", "triangle_time", "--max-iter", "2", "--quiet", "--out", str(blocker / "sub")])
    assert status == cli.EXIT_WRITE


def test_compare_rejects_different_scenarios(tmp_path):
    status = cli.main(["compare", "--builtin", "triangle_time", "--builtin", "square_hetero", "--out", str(tmp_path)])
    assert status == cli.EXIT_INVALID


def test_compare_identical_runs(tmp_path, monkeypatch):
    monkeypatch.setenv("HOPFLAX_THREADS", "2")
    status = cli.main(["compare", "--builtin", "triangle_time", "--builtin", "triangle_time",
                       "--max-iter", "50", "--quiet", "--out", str(tmp_path)])
    assert status == cli.EXIT_NOT_CONVERGED
    a, b = json.loads((tmp_path / "compare.json").read_text())["runs"]
    a.pop("run"), b.pop("run")
    assert a == b


def test_compare_weight_regimes(tmp_path, capsys):
    status = cli.main(["compare", "--builtin", "triangle_time", "--builtin", "triangle_formation", "--out", str(tmp_path)])
    assert status == cli.EXIT_OK
    a, b = json.loads((tmp_path / "compare.json").read_text())["runs"]
    assert b["formation_penalty_integral"] < a["formation_penalty_integral"]
    assert 4.5 <= a["arrival_time"] <= 5.5
    printed = capsys.readouterr().out
    assert "triangle_formation" in printed and "arrival_time" in printed
