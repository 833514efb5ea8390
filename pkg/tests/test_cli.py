from __future__ import annotations

import csv
import subprocess
import sys

import pytest

from uwb_dtdoa.cli import main
from uwb_dtdoa.geometry import distance
from uwb_dtdoa.scenarios import DEFAULT_ANCHORS, DEFAULT_MASTER, default_config, dump_config

# small but complete runs of every stochastic subcommand
STOCHASTIC = {
    "sync-demo": ["sync-demo", "--seed", "5"],
    "static": ["simulate", "--seed", "5", "--repetitions", "20", "--bins", "9"],
    "walk": ["simulate", "--seed", "5", "--mode", "walk"],
    "montecarlo": ["montecarlo", "--seed", "5", "--trials", "200", "--anchors", "3", "--fig3"],
    "scalability": ["scalability", "--seed", "5", "--tags", "1,10"],
}

OUTPUTS = {
    "sync-demo": {"sync.csv"},
    "static": {"static_summary.csv", "static_hist.csv", "static_hist.svg"},
    "walk": {"walk.csv", "walk.svg"},
    "montecarlo": {"montecarlo_all.csv", "fig2.csv", "fig2.svg", "fig3.csv", "fig3.svg"},
    "scalability": {"scalability.csv"},
}


def run(args, out):
    return main([*args, "--out", str(out)])


def data_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


@pytest.mark.parametrize("name", sorted(STOCHASTIC))
def test_stochastic_subcommands_are_byte_identical(name, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(STOCHASTIC[name], a) == 0
    assert run(STOCHASTIC[name], b) == 0
    files = {p.name for p in a.iterdir()}
    assert files == OUTPUTS[name]
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    printed = capsys.readouterr().out.split()
    assert len(printed) == 2 * len(files)


def test_different_seed_changes_output(tmp_path):
    run(["simulate", "--seed", "1", "--repetitions", "5"], tmp_path / "a")
    run(["simulate", "--seed", "2", "--repetitions", "5"], tmp_path / "b")
    assert (tmp_path / "a/static_summary.csv").read_bytes() != (tmp_path / "b/static_summary.csv").read_bytes()


def test_headers_carry_seed_and_version(tmp_path):
    run(STOCHASTIC["sync-demo"], tmp_path)
    comments = [ln for ln in (tmp_path / "sync.csv").read_text().splitlines() if ln.startswith("# ")]
    assert comments[0].startswith("# uwb-dtdoa ")
    assert any("seed" in ln and "5" in ln for ln in comments)
    rows = data_rows(tmp_path / "sync.csv")
    assert rows[0][0] == "anchor" and len(rows) == 7


def test_sync_demo_recovers_rates(tmp_path):
    run(STOCHASTIC["sync-demo"], tmp_path)
    rows = data_rows(tmp_path / "sync.csv")
    col = rows[0].index("rate_error")
    assert all(abs(float(r[col])) < 1e-8 for r in rows[1:])


def test_montecarlo_single_target(tmp_path):
    assert run(["montecarlo", "--seed", "1", "--trials", "200", "--anchors", "2", "--target", "xi"], tmp_path) == 0
    assert (tmp_path / "montecarlo_xi.csv").exists()


def test_report(tmp_path):
    assert run(["report"], tmp_path) == 0
    rows = data_rows(tmp_path / "report.csv")
    assert len(rows) == 7


def test_report_rejects_early_time(tmp_path, capsys):
    assert run(["report", "--time", "0.5"], tmp_path) == 1
    assert "error CONFIG_INVALID" in capsys.readouterr().err


def test_pdop_map(tmp_path):
    assert run(["pdop-map", "--resolution", "1.0"], tmp_path) == 0
    rows = data_rows(tmp_path / "pdop.csv")
    assert rows[0] == ["x_m", "y_m", "pdop"] and len(rows) == 1 + 10 * 8
    assert (tmp_path / "pdop.svg").read_text().startswith("<svg")


def test_solve_prints_one_fix(tmp_path, capsys):
    truth = (3.0, 2.5)
    lines = ["anchor_id,value,predicted_variance"]
    for k, a in enumerate(DEFAULT_ANCHORS, start=1):
        lines.append(f"{k},{distance(truth, a) - distance(truth, DEFAULT_MASTER)!r},1e-4")
    path = tmp_path / "m.csv"
    path.write_text("\n".join(lines) + "\n")
    assert main(["solve", "--input", str(path)]) == 0
    out = capsys.readouterr().out
    rows = list(csv.reader(ln for ln in out.splitlines() if not ln.startswith("#")))
    assert rows[0][:2] == ["x_m", "y_m"] and len(rows) == 2
    assert float(rows[1][0]) == pytest.approx(3.0, abs=1e-8)
    assert float(rows[1][1]) == pytest.approx(2.5, abs=1e-8)


@pytest.mark.parametrize(
    "content, code",
    [(None, "INPUT_NOT_FOUND"), ("anchor_id,value\n1,abc\n", "INPUT_INVALID"), ("anchor_id,value\n9,1.0\n2,0.5\n", "INPUT_INVALID")],
)
def test_solve_input_errors(tmp_path, capsys, content, code):
    path = tmp_path / "m.csv"
    if content is not None:
        path.write_text(content)
    assert main(["solve", "--input", str(path)]) == 1
    assert f"error {code}:" in capsys.readouterr().err


def test_scenario_file_and_seed_override(tmp_path):
    cfg = tmp_path / "room.yaml"
    cfg.write_text(dump_config(default_config(5)))
    run(["sync-demo", "--scenario", str(cfg)], tmp_path / "file")
    run(STOCHASTIC["sync-demo"], tmp_path / "flag")
    run(["sync-demo", "--scenario", str(cfg), "--seed", "6"], tmp_path / "over")
    file, flag, over = (data_rows(tmp_path / d / "sync.csv") for d in ("file", "flag", "over"))
    assert file == flag
    assert over != file


@pytest.mark.parametrize(
    "argv, code",
    [
        (["simulate", "--scenario", "/nonexistent/room.yaml"], "CONFIG_NOT_FOUND"),
        (["simulate", "--repetitions", "3"], "SEED_REQUIRED"),
        (["montecarlo", "--trials", "100"], "SEED_REQUIRED"),
        (["frobnicate"], "USAGE"),
        ([], "USAGE"),
        (["scalability", "--seed", "1", "--tags", "a,b"], "USAGE"),
        (["pdop-map", "--resolution", "0"], "CONFIG_INVALID"),
    ],
)
def test_error_exits(argv, code, tmp_path, capsys):
    assert main([*argv, "--out", str(tmp_path)] if argv else []) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith(f"uwb-dtdoa: error {code}:")


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["sync-demo", "--seed", "1", "--out", str(blocker / "sub")]) == 1
    assert "error IO_ERROR" in capsys.readouterr().err


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "uwb_dtdoa.cli", "--version"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and proc.stdout.startswith("uwb-dtdoa ")
