"""Command-line entry point: ``uwb-dtdoa <subcommand> ...``.

Every subcommand writes its artifacts into ``--out`` (created if needed)
and prints the written paths. Failures print one line
``uwb-dtdoa: error CODE: message`` on stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dtdoa import DtdoaMeasurement
from .errors import ConfigError, DtdoaError
from .montecarlo import FIG2_TARGETS, McConfig, Target, emit_fig2, emit_fig3, results_csv, simulate, with_noise
from .plotting import heatmap
from .scenarios import (
    Scenario,
    default_scenario,
    load_scenario,
    run_scalability,
    run_static,
    run_walk,
    scalability_csv,
    scenario_from_config,
)
from .solver import FIX_COLUMNS, fix_csv_row, pdop_map, solve
from .uncertainty import VarianceReport, report_csv

PROG = "uwb-dtdoa"


class UsageError(DtdoaError):
    code = "USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 with a parseable line instead of argparse's exit 2
        raise UsageError(message)


def _f(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.16e}"


def _header(command: str, seed: int | None, config: dict) -> list[str]:
    lines = [f"{PROG} {__version__} {command}", f"seed={seed if seed is not None else 'none'}"]
    lines += [f"{k}={config[k]}" for k in sorted(config)]
    return lines


def _write(out: Path, name: str, text: str) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        path.write_text(text)
    except OSError as exc:
        raise DtdoaError(f"cannot write {out / name}: {exc.strerror}", code="IO_ERROR") from None
    print(path)
    return path


def _scenario(args, seed_required: bool = True) -> Scenario:
    if args.scenario is not None:
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            cfg = dict(sc.config)
            cfg["seed"] = args.seed
            sc = scenario_from_config(cfg)
        return sc
    if args.seed is None and seed_required:
        raise ConfigError("--seed is required without a scenario file", code="SEED_REQUIRED")
    return default_scenario(args.seed if args.seed is not None else 0)


def _scenario_header(sc: Scenario, command: str, extra: dict) -> list[str]:
    return sc.header(command) + [f"{k}={extra[k]}" for k in sorted(extra)]


# -- subcommands -------------------------------------------------------------


def cmd_sync_demo(args) -> None:
    sc = _scenario(args)
    k = args.round
    states = sc.sync_round(k)
    buf = io.StringIO()
    for line in _scenario_header(sc, "sync-demo", {"round": k}):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["anchor", "true_rel_rate", "est_rel_rate", "rate_error", "true_rel_offset_s",
                "est_rel_offset_s", "offset_error_s", "residual_s"])
    m = sc.master_clock
    for i, (clock, st) in enumerate(zip(sc.anchor_clocks, states), start=1):
        rate = clock.rate / m.rate
        offset = clock.offset - rate * m.offset
        w.writerow([i, _f(rate), _f(float(st.rel_rate)), _f(float(st.rel_rate) - rate), _f(offset),
                    _f(float(st.rel_offset)), _f(float(st.rel_offset) - offset), _f(float(st.residual))])
    _write(args.out, "sync.csv", buf.getvalue())


def cmd_simulate(args) -> None:
    sc = _scenario(args)
    if args.mode == "static":
        res = run_static(sc, args.repetitions)
        head = _scenario_header(sc, "simulate", {"mode": "static", "repetitions": args.repetitions})
        _write(args.out, "static_summary.csv", res.summary_csv(head))
        _write(args.out, "static_hist.csv", res.histogram_csv(head, args.bins))
        _write(args.out, "static_hist.svg", res.histogram_svg(args.bins))
    else:
        res = run_walk(sc, args.tag)
        head = _scenario_header(sc, "simulate", {"mode": "walk", "tag": res.name})
        _write(args.out, "walk.csv", res.to_csv(head))
        nodes = [tuple(sc.geometry.master)] + [tuple(a) for a in sc.geometry.anchors]
        _write(args.out, "walk.svg", res.to_svg(nodes))


def cmd_montecarlo(args) -> None:
    if args.seed is None:
        raise ConfigError("--seed is required", code="SEED_REQUIRED")
    try:
        cfg = McConfig(trials=args.trials, anchors=args.anchors, seed=args.seed, noise=args.noise)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run = simulate(cfg)
    head = _header("montecarlo", args.seed, {"target": args.target, **{k: v for k, v in vars(cfg).items() if k != "seed"}})
    if args.target == "all":
        by_target = {t: run.results(t) for t in Target}
        _write(args.out, "montecarlo_all.csv", results_csv([r for t in Target for r in by_target[t]], head))
        table, svg = emit_fig2({t: by_target[t] for t in FIG2_TARGETS}, head)
        _write(args.out, "fig2.csv", table)
        _write(args.out, "fig2.svg", svg)
    else:
        target = Target(args.target)
        results = run.results(target)
        _write(args.out, f"montecarlo_{target.value}.csv", results_csv(results, head))
        if target in FIG2_TARGETS:
            table, svg = emit_fig2({target: results, **{t: run.results(t) for t in FIG2_TARGETS if t != target}}, head)
            _write(args.out, "fig2.csv", table)
            _write(args.out, "fig2.svg", svg)
    if args.fig3:
        other = "uniform" if cfg.noise == "gaussian" else "gaussian"
        run_other = simulate(with_noise(cfg, other))
        runs = {cfg.noise: run, other: run_other}
        table, svg = emit_fig3(runs["gaussian"], runs["uniform"], header=head)
        _write(args.out, "fig3.csv", table)
        _write(args.out, "fig3.svg", svg)


def cmd_report(args) -> None:
    sc = _scenario(args, seed_required=False)
    t = sc.start_time if args.time is None else args.time
    if t < sc.start_time:
        raise ConfigError(f"--time must be at least the first sync completion ({sc.start_time} s)")
    reports = []
    for i in range(1, sc.geometry.n_anchors + 1):
        reports.append(VarianceReport.from_budget(sc.budget(i, t, sc.tag_clocks[0] if sc.tag_clocks else None)))
    _write(args.out, "report.csv", report_csv(reports, _scenario_header(sc, "report", {"time_s": t})))


def _read_measurements(path: Path) -> list[DtdoaMeasurement]:
    if not path.is_file():
        raise DtdoaError(f"measurement file not found: {path}", code="INPUT_NOT_FOUND")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    out = []
    try:
        for row in csv.DictReader(lines):
            var = row.get("predicted_variance") or "0"
            out.append(DtdoaMeasurement(int(row["anchor_id"]), float(row["value"]), float(var)))
    except (KeyError, TypeError, ValueError) as exc:
        raise DtdoaError(f"bad measurement file {path}: {exc}", code="INPUT_INVALID") from None
    return out


def cmd_solve(args) -> None:
    sc = _scenario(args, seed_required=False)
    meas = _read_measurements(Path(args.input))
    for m in meas:
        if not 1 <= m.anchor_id <= sc.geometry.n_anchors:
            raise DtdoaError(f"anchor id {m.anchor_id} not in the geometry", code="INPUT_INVALID")
    fix = solve(meas, sc.geometry, initial_guess=args.guess, multistart=args.multistart)
    buf = io.StringIO()
    for line in _scenario_header(sc, "solve", {"input": args.input}):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIX_COLUMNS)
    w.writerow(fix_csv_row(fix))
    sys.stdout.write(buf.getvalue())


def cmd_pdop_map(args) -> None:
    sc = _scenario(args, seed_required=False)
    if args.bounds is None:
        nodes = np.vstack([sc.geometry.master[None, :], sc.geometry.anchors])
        lo, hi = nodes.min(axis=0), nodes.max(axis=0)
        bounds = (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))
    else:
        bounds = tuple(args.bounds)
    try:
        grid = pdop_map(sc.geometry, bounds, args.resolution)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    head = _scenario_header(sc, "pdop-map", {"bounds": list(bounds), "resolution": args.resolution})
    _write(args.out, "pdop.csv", grid.to_csv(head))
    points = {"anchors": [tuple(a) for a in sc.geometry.anchors], "master": [tuple(sc.geometry.master)]}
    _write(args.out, "pdop.svg", heatmap(grid.xs, grid.ys, grid.grid, "PDoP map", points, vmax=args.vmax))


def cmd_scalability(args) -> None:
    sc = _scenario(args)
    rows = run_scalability(sc, args.tags)
    _write(args.out, "scalability.csv", scalability_csv(rows, _scenario_header(sc, "scalability", {"tags": args.tags})))


# -- parser ------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Downlink TDoA UWB simulation and analysis.")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
        if scenario:
            p.add_argument("--scenario", type=Path, help="YAML scenario file (default: built-in room)")
        p.add_argument("--seed", type=int, help="random seed (overrides the scenario's)")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("sync-demo", help="run one sync round and compare estimates with the true clocks")
    common(p)
    p.add_argument("--round", type=int, default=0, help="sync round index")
    p.set_defaults(func=cmd_sync_demo)

    p = sub.add_parser("simulate", help="static-tag histograms or a walking track")
    common(p)
    p.add_argument("--mode", choices=("static", "walk"), default="static")
    p.add_argument("--repetitions", type=int, default=1000)
    p.add_argument("--bins", type=int, default=41)
    p.add_argument("--tag", help="tag name for walk mode (default: first moving tag)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="Monte Carlo check of the closed-form variances")
    common(p, scenario=False)
    p.add_argument("--target", choices=[t.value for t in Target] + ["all"], default="all")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--anchors", type=int, default=10)
    p.add_argument("--noise", choices=("gaussian", "uniform"), default="gaussian")
    p.add_argument("--fig3", action="store_true", help="also run the other noise family and emit error histograms")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("report", help="closed-form variances per anchor")
    common(p)
    p.add_argument("--time", type=float, help="ideal time of the broadcast cycle (s)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("solve", help="solve one fix from a measurement CSV (anchor_id,value[,predicted_variance])")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--guess", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--multistart", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pdop-map", help="PDoP over a rectangle")
    common(p)
    p.add_argument("--resolution", type=float, default=0.1)
    p.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--vmax", type=float, default=None, help="clip the color scale")
    p.set_defaults(func=cmd_pdop_map)

    p = sub.add_parser("scalability", help="fixes per second for many tags served by one broadcast")
    common(p)
    p.add_argument("--tags", type=_int_list, default=[1, 10, 1000])
    p.set_defaults(func=cmd_scalability)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except DtdoaError as exc:
        message = str(exc).replace("\n", " ")
        print(f"{PROG}: error {exc.code}: {message}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"{PROG}: error CONFIG_INVALID: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
