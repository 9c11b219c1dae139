import csv
import json
import os
import subprocess
import sys

import pytest

from bucketeer.cli import main

ASSIGN = ["assign", "--experiment", "exp_A", "--user", "user_0", "--algo", "4",
          "--exposure", "100", "--buckets", "control:50,treatment:50"]


def run_cli(*args, env=None):
    full_env = {**os.environ, **(env or {})}
    return subprocess.run(
        [sys.executable, "-m", "bucketeer", *args],
        capture_output=True, text=True, env=full_env,
    )


def test_assign_deterministic():
    first = run_cli(*ASSIGN)
    second = run_cli(*ASSIGN)
    assert first.returncode == 0
    assert first.stdout == second.stdout
    assert json.loads(first.stdout)["verdict"] == "bucket"


def test_assign_trace(capsys):
    assert main(ASSIGN + ["--trace"]) == 0
    trace = json.loads(capsys.readouterr().out)
    assert trace["r_e"] == trace["z"] // 100 and trace["r_b"] == trace["z"] % 100
    assert trace["algorithm"] == "spooky"


def test_assign_original_trace(capsys):
    args = ["assign", "--experiment", "exp1", "--salt", "s1", "--user", "user42", "--algo", "1",
            "--exposure", "50", "--buckets", "control:20,treatment:80", "--trace"]
    assert main(args) == 0
    trace = json.loads(capsys.readouterr().out)
    assert (trace["r_e"], trace["r_b"], trace["assignment"]["bucket"]) == (1, 30, "treatment")
    assert "z" not in trace


@pytest.mark.parametrize(
    "bad",
    [
        ["--buckets", "control:50,treatment:40"],
        ["--buckets", "control50"],
        ["--buckets", "control:x"],
        ["--algo", "9"],
        ["--exposure", "120"],
        ["--bogus-flag"],
    ],
)
def test_usage_errors_exit_2(bad, capsys):
    args = list(ASSIGN)
    for flag, *value in [bad]:
        if flag in args:
            i = args.index(flag)
            args[i + 1:i + 2] = value
        else:
            args += [flag, *value]
    with pytest.raises(SystemExit) as exc:
        sys.exit(main(args))
    assert exc.value.code == 2
    assert "error" in capsys.readouterr().err


def test_uniformity_pass_and_plot_data(tmp_path, capsys):
    code = main(["uniformity", "--algo", "3", "--exposure", "10", "--users", "50000",
                 "--plot-data", str(tmp_path), "--out", str(tmp_path / "r.json")])
    out = json.loads(capsys.readouterr().out)
    assert code == (1 if out["tests"]["gof_uniform"]["reject"] else 0)
    rows = list(csv.reader((tmp_path / "histogram.csv").open()))
    assert rows[0] == ["cell", "count"] and len(rows) == 101
    assert json.loads((tmp_path / "r.json").read_text()) == out


def test_uniformity_reject_exit_1(capsys):
    assert main(["uniformity", "--algo", "1", "--exposure", "10", "--users", "50000"]) == 1
    assert json.loads(capsys.readouterr().out)["tests"]["gof_uniform"]["reject"] is True


def test_uniformity_sample_floor_exit_2(capsys):
    assert main(["uniformity", "--algo", "3", "--exposure", "10", "--users", "100"]) == 2
    assert "increase n_users" in capsys.readouterr().err


def test_independence_scatter(tmp_path, capsys):
    code = main(["independence", "--algo", "4", "--users", "20000", "--plot-data", str(tmp_path)])
    assert code in (0, 1)
    rows = list(csv.reader((tmp_path / "scatter.csv").open()))
    assert rows[0] == ["rb_i", "rb_j"] and len(rows) == 1001
    assert main(["independence", "--algo", "4", "--users", "20000", "--experiments", "a,a"]) == 2


def test_srm(tmp_path, capsys):
    code = main(["srm", "--algo", "1", "--exposure", "1", "--buckets", "control:2,treatment:98",
                 "--users", "300000", "--plot-data", str(tmp_path)])
    assert code == 1
    rows = list(csv.reader((tmp_path / "bucket_counts.csv").open()))
    assert rows[0] == ["bucket", "count"]


def test_seed_env_override():
    args = ["uniformity", "--algo", "2", "--exposure", "100", "--users", "2000"]
    a = run_cli(*args, env={"BUCKETEER_SEED": "5"})
    b = run_cli(*args, "--seed", "5")
    c = run_cli(*args)
    assert json.loads(a.stdout)["scenario"]["corpus"]["seed"] == 5
    assert a.stdout == b.stdout
    assert json.loads(c.stdout)["scenario"]["corpus"]["seed"] == 0
    assert run_cli(*args, env={"BUCKETEER_SEED": "nope"}).returncode == 2


def test_non_bench_output_byte_identical():
    args = ["independence", "--algo", "2", "--users", "5000"]
    assert run_cli(*args).stdout == run_cli(*args).stdout


def test_bench_table(capsys):
    assert main(["bench", "--algos", "1,2", "--users", "3000", "--iterations", "1"]) == 0
    out = capsys.readouterr().out
    assert "algo1" in out and "algo2" in out
    assert main(["bench", "--algos", "2", "--users", "1000", "--iterations", "1",
                 "--backend", "python", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["backend"] == "python" and list(doc["ns_per_assignment"]) == ["algo2"]


def test_repro_inventory(tmp_path, capsys):
    code = main(["repro", "--out", str(tmp_path), "--users", "20000"])
    summary = json.loads(capsys.readouterr().out)
    assert code == (0 if summary["ok"] else 1)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["fig1.csv", "fig2.csv", "fig3.csv", "table1.json", "table2.json"]
    table1 = json.loads((tmp_path / "table1.json").read_text())
    assert len(table1["rows"]) == 8
    table2 = json.loads((tmp_path / "table2.json").read_text())
    assert [r["variant"] for r in table2["rows"]] == ["algo1", "algo2", "algo3", "algo4"]
    fig3 = list(csv.reader((tmp_path / "fig3.csv").open()))
    assert fig3[0] == ["variant", "rb_i", "rb_j"] and len(fig3) == 4001
    fig2 = list(csv.reader((tmp_path / "fig2.csv").open()))
    assert len(fig2) == 1 + 3 * 2 * 100
