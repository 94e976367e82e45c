import json
from pathlib import Path

import pytest

from condforest import __version__
from condforest.cli import Settings, build_parser, read_config, run
from condforest.serialize import deserialize

GOLDEN = Path(__file__).parent / "golden"

GOLDEN_RUNS = {
    "condition": ["condition", "--law", "binary", "--k", "2", "--n", "4", "--seed", "7"],
    "condition_geometric": ["condition", "--law", "geometric", "--k", "5", "--n", "60", "--seed", "3"],
    "sample_forest": ["sample-forest", "--law", "geometric", "--k", "3", "--seed", "1"],
    "transform": ["transform", "--input", str(GOLDEN / "figure_tree.json")],
    "stable_sim": ["stable-sim", "--alpha", "1.5", "--grid-n", "2000", "--s", "1", "--seed", "1"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
def test_golden_outputs(name, tmp_path):
    assert run(GOLDEN_RUNS[name] + ["--out", str(tmp_path)]) == 0
    expected = sorted(p.name for p in (GOLDEN / name).iterdir())
    assert sorted(p.name for p in tmp_path.iterdir()) == expected
    for fname in expected:
        assert (tmp_path / fname).read_bytes() == (GOLDEN / name / fname).read_bytes(), fname


def test_repeat_runs_are_identical(tmp_path):
    args = ["condition", "--law", "geometric", "--k", "3", "--n", "200", "--seed", "42"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    for f in ("forest.json", "walk.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_condition_outputs_are_consistent(tmp_path):
    assert run(["condition", "--law", "binary", "--k", "2", "--n", "4", "--seed", "7", "--out", str(tmp_path)]) == 0
    forest = deserialize((tmp_path / "forest.json").read_text(), "forest-json")
    walk = deserialize((tmp_path / "walk.csv").read_text(), "path-csv")
    assert forest.total_progeny == 4 and len(forest) == 2
    assert walk.values[-1] == -2


def test_infeasible_condition(capsys):
    assert run(["condition", "--law", "binary", "--k", "1", "--n", "2"]) == 1
    assert "P(T_1=2)=0" in capsys.readouterr().err


def test_help_and_version(capsys):
    assert run(["--help"]) == 0
    assert "condition" in capsys.readouterr().out
    assert run(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_usage_errors(tmp_path, capsys):
    assert run([]) == 1
    assert run(["bogus"]) == 1
    assert run(["condition", "--law", "binary", "--k", "2", "--n", "4", "--out", str(tmp_path)]) == 1
    assert "--seed" in capsys.readouterr().err
    assert run(["condition", "--law", "binary", "--k", "two", "--n", "4", "--seed", "1"]) == 1
    assert run(["condition", "--law", "nope", "--k", "2", "--n", "4", "--seed", "1", "--out", str(tmp_path)]) == 1
    assert run(["transform", "--input", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert run(["verify", "--suite", "nothing", "--seed", "1"]) == 1


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    args = ["condition", "--law", "binary", "--k", "2", "--n", "4", "--seed", "7"]
    assert run(args + ["--out", str(blocker / "sub")]) == 1


def test_transform_reads_its_own_outputs(tmp_path):
    first = tmp_path / "first"
    assert run(["transform", "--input", str(GOLDEN / "figure_tree.json"), "--out", str(first)]) == 0
    for source in ("walk.csv", "forest.json"):
        out = tmp_path / source
        assert run(["transform", "--input", str(first / source), "--out", str(out)]) == 0
        assert (out / "height.csv").read_bytes() == (first / "height.csv").read_bytes()


def test_transform_rejects_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("index,value\n0,0\n1,-3\n")
    assert run(["transform", "--input", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "downward jump" in capsys.readouterr().err
    real = tmp_path / "real.csv"
    real.write_text("t,value\n0.0,0.0\n1.0,1.0\n")
    assert run(["transform", "--input", str(real), "--out", str(tmp_path / "o")]) == 1


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for a run\nlaw = geometric\nk = 3\nn = 50\nseed = 5\n")
    parser = build_parser()
    args = parser.parse_args(["--config", str(cfg), "condition", "--k", "4"])
    s = Settings(args, read_config(cfg))
    assert (s.law, s.k, s.n, s.seed) == ("geometric", 4, 50, 5)
    assert s.grid_n == 10_000
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "condition", "--k", "4", "--out", str(out)]) == 0
    assert len(deserialize((out / "forest.json").read_text(), "forest-json")) == 4


def test_config_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(["--config", str(cfg), "verify", "--seed", "1"]) == 1
    cfg.write_text("just words\n")
    assert run(["--config", str(cfg), "verify", "--seed", "1"]) == 1
    assert run(["--config", str(tmp_path / "none.cfg"), "verify", "--seed", "1"]) == 1


def test_stable_sim_files_parse(tmp_path):
    assert run(GOLDEN_RUNS["stable_sim"] + ["--out", str(tmp_path)]) == 0
    bridge = deserialize((tmp_path / "bridge.csv").read_text(), "path-csv")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert abs(bridge.values[-1] + 1.0) <= summary["tolerance"]
    exc = json.loads((tmp_path / "excursions.json").read_text())
    assert exc["file"] == "bridge_height.csv"
    assert all(e["start"] < e["end"] for e in exc["excursions"])


def test_verify_subset(tmp_path, capsys):
    code = run(["verify", "--suite", "feller,commutation", "--seed", "1", "--out", str(tmp_path)])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines] == ["PASS", "PASS"]
    assert json.loads((tmp_path / "verify.json").read_text())["seed"] == 1


def test_verify_failure_exit_code():
    # the passage-time uniformity claim does not hold, so this suite fails
    assert run(["verify", "--suite", "passage-uniformity", "--seed", "1"]) == 2


def test_experiment_outputs(tmp_path):
    args = ["experiment", "--law", "geometric", "--s", "1", "--n-values", "200,800",
            "--samples", "200", "--seed", "3", "--out", str(tmp_path)]
    code = run(args)
    assert code in (0, 2)
    report = deserialize((tmp_path / "report.json").read_text(), "report-json")
    assert [row["n"] for row in report["per_n"]] == [200, 800]
    assert (tmp_path / "ks.csv").read_text().startswith("n,ks_0.25,ks_0.5,ks_0.75,sup_hc")
    assert (tmp_path / "ks.svg").read_text().startswith("<svg")
    assert (code == 0) == report["verdicts"]["pass"]


def test_experiment_bad_n_values(tmp_path):
    args = ["experiment", "--s", "1", "--n-values", "10,x", "--seed", "1", "--out", str(tmp_path)]
    assert run(args) == 1
