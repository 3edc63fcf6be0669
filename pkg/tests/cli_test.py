"""
Test cli module functionality
Commands, written files and exit codes
"""

import pandas as pd

from utils.channel import load_trace, trace_size
from utils.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main

QUICK = ["--preset", "small-hc-loose", "--ttis", "3"]


def test_run_writes_results(tmp_path):
    code = main(["run", *QUICK, "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    metrics = pd.read_csv(tmp_path / "metrics.csv")
    assert metrics.loc[0, "scheduler"] == "dro"
    log = pd.read_csv(tmp_path / "tti_log.csv")
    assert {"tti", "rb", "slice_ids", "deficit_1"} <= set(log.columns)
    assert (tmp_path / "tti_summary.csv").exists()


def test_compare_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    args = ["compare", *QUICK, "--schedulers", "dro,drs"]
    assert main([*args, "--output-dir", str(first), "--plot"]) == EXIT_OK
    assert main([*args, "--output-dir", str(second)]) == EXIT_OK
    assert (first / "comparison.csv").read_bytes() == (second / "comparison.csv").read_bytes()
    table = pd.read_csv(first / "comparison.csv")
    assert table["scheduler"].tolist() == ["dro", "drs"]
    assert "median_decision_us" not in table.columns
    assert (first / "comparison.html").exists()
    markdown = (first / "comparison.md").read_text()
    assert "| dro |" in markdown and "Channel digest" in markdown


def test_bench_writes_latency(tmp_path):
    code = main(["bench", "--preset", "small-hc-loose", "--scheduler", "drs",
                 "--repetitions", "2", "--output-dir", str(tmp_path)])
    assert code == EXIT_OK
    latency = pd.read_csv(tmp_path / "latency.csv")
    assert latency.loc[0, "samples"] == 2


def test_gen_trace(tmp_path):
    out = tmp_path / "h.mmch"
    code = main(["gen-trace", str(out), "--antennas", "8", "--users", "4", "--rbs", "3",
                 "--ttis", "2", "--clusters", "2,2", "--nlos", "1", "--seed", "5"])
    assert code == EXIT_OK
    assert out.stat().st_size == trace_size(8, 4, 3, 2)
    assert load_trace(out).num_users == 4


def test_validate_config(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text("experiment:\n  preset: small-lc-tight\n")
    assert main(["validate-config", str(good)]) == EXIT_OK

    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment:\n  preset: small-lc-tight\n  colour: blue\n")
    assert main(["validate-config", str(bad)]) == EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err

    assert main(["validate-config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_usage_errors_exit_with_config_code():
    assert main(["run", *QUICK, "--scheduler", "fifo"]) == EXIT_CONFIG
    assert main(["no-such-command"]) == EXIT_CONFIG
    assert main(["gen-trace", "x.mmch", "--clusters", "2,a"]) == EXIT_CONFIG


def test_infeasible_scheduler_exit_code(tmp_path, capsys):
    path = tmp_path / "exp.yaml"
    path.write_text(
        "experiment:\n"
        "  preset: small-hc-loose\n"
        "  scheduler: rs_es\n"
        "  combination_cap: 1\n"
        "  num_ttis: 2\n"
    )
    assert main(["run", "--config", str(path), "--output-dir", str(tmp_path)]) == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err.lower()
