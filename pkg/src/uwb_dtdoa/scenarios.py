"""End-to-end positioning runs: static tags, a walking tag, many tags.

A scenario fixes the room, the clocks, the noise and the broadcast
schedule. Time runs continuously: the master sends a sync message every
``sync_interval`` seconds, each anchor pairs consecutive sync messages to
refresh its rate and offset, and the broadcast cycles repeat back to back.
One broadcast is shared by every tag in the room.

Scenario files are YAML; see ``SCHEMA`` below and the README.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import __version__
from .clocks import TICK_S, ClockModel, Distribution, NoiseSpec, Time, read_measured
from .dtdoa import (
    BroadcastSchedule,
    DtdoaMeasurement,
    Transmission,
    broadcast,
    cycle_measurements,
    receive,
)
from .errors import ConfigError, ConfigNotFoundError, DtdoaError
from .geometry import SPEED_OF_LIGHT, NetworkGeometry, TagState
from .plotting import histograms, track
from .rng import stream
from .solver import solve
from .sync import SyncObservation, SyncState, solve_sync
from .uncertainty import NoiseBudget, var_lambda

# substream keys
_CLOCKS, _SYNC, _CYCLE, _TAG, _PLACEMENT = 1, 2, 3, 4, 5

DEFAULT_MASTER = (0.0, 0.0)
DEFAULT_ANCHORS = ((5.0, 0.0), (10.0, 0.0), (10.0, 8.0), (5.0, 8.0), (0.0, 8.0), (0.0, 4.0))
# Placeholder test positions and walking loop; not taken from measurements.
DEFAULT_STATIC = {"P1": (3.0, 2.5), "P2": (7.0, 5.5)}
DEFAULT_WALK = ((2.0, 2.0), (8.0, 2.0), (8.0, 6.0), (2.0, 6.0), (2.0, 2.0))

SCHEMA = """\
seed: int                        # required for every stochastic run
duration: float                  # seconds simulated by walk runs
geometry:
  master: [x, y]
  anchors: [[x, y], ...]
  c: float                       # optional, m/s
clocks:
  rate_ppm: float                # rates drawn within +-rate_ppm ...
  offset_range: float            # ... and offsets within +-offset_range seconds
  master: {offset, rate}         # optional explicit values
  anchors: [{offset, rate}, ...]
noise: {distribution: none|gaussian|uniform, scale: float, quantize: float|null}
schedule: {kind: default|back_to_back, slot_spacing, pair_gap, guard, idle_tail}
sync: {interval: float, averaged: bool}
tags:
  - {name: str, position: [x, y]}
  - {name: str, waypoints: [[x, y], ...], speed: float}
bias: [meters per anchor]        # optional constant extra path length
tag_rate_source: anchor|master
placeholder_positions: bool      # marks invented coordinates in output headers
"""


@dataclass(frozen=True)
class TagSpec:
    """A fixed point (one waypoint) or a polyline walked at constant speed."""

    name: str
    waypoints: tuple[tuple[float, float], ...]
    speed: float = 0.0

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.waypoints)
        if not pts:
            raise ConfigError(f"tag {self.name!r} has no position")
        if not all(math.isfinite(v) for p in pts for v in p):
            raise ConfigError(f"tag {self.name!r} has non-finite waypoints")
        if self.speed < 0 or not math.isfinite(self.speed):
            raise ConfigError(f"tag {self.name!r} speed must be finite and >= 0")
        object.__setattr__(self, "waypoints", pts)

    @property
    def static(self) -> bool:
        return len(self.waypoints) == 1 or self.speed == 0.0

    @property
    def length(self) -> float:
        p = np.array(self.waypoints)
        return float(np.sum(np.hypot(*np.diff(p, axis=0).T))) if len(p) > 1 else 0.0

    def state(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity after walking for ``t`` seconds; stops at the end."""
        p = np.array(self.waypoints)
        if self.static:
            return p[0], np.zeros(2)
        s = self.speed * t
        for a, b in zip(p, p[1:]):
            seg = float(np.hypot(*(b - a)))
            if seg == 0.0:
                continue
            if s < seg:
                u = (b - a) / seg
                return a + s * u, self.speed * u
            s -= seg
        return p[-1], np.zeros(2)


@dataclass(frozen=True, eq=False)
class Scenario:
    geometry: NetworkGeometry
    schedule: BroadcastSchedule
    master_clock: ClockModel
    anchor_clocks: tuple[ClockModel, ...]
    tag_clocks: tuple[ClockModel, ...]
    tags: tuple[TagSpec, ...]
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sync_interval: float = 10.0
    averaged_sync: bool = True
    duration: float = 10.0
    bias: tuple[float, ...] | None = None
    seed: int = 0
    tag_rate_source: str = "anchor"
    placeholder_positions: bool = False
    config: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.geometry.n_anchors
        if n < 1:
            raise ConfigError("a scenario needs at least one anchor")
        if self.schedule.n_anchors != n or len(self.anchor_clocks) != n:
            raise ConfigError("geometry, schedule and anchor clocks disagree on the anchor count")
        if len(self.tag_clocks) != len(self.tags):
            raise ConfigError("one clock per tag is required")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if not self.sync_interval > 0:
            raise ConfigError("sync interval must be positive")
        if self.bias is not None and len(self.bias) != n:
            raise ConfigError("one bias value per anchor is required")
        if self.tag_rate_source not in ("anchor", "master"):
            raise ConfigError(f"unknown tag_rate_source {self.tag_rate_source!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def cycle_period(self) -> float:
        return self.schedule.cycle_period

    @property
    def start_time(self) -> float:
        """First cycle start: right after the first sync pair completes."""
        return self.sync_interval

    def header(self, command: str) -> list[str]:
        lines = [f"uwb-dtdoa {__version__} {command}", f"seed={self.seed}"]
        if self.placeholder_positions:
            lines.append("note=room layout and tag positions are placeholders, not measured coordinates")
        dumped = yaml.safe_dump(_plain(self.config), sort_keys=True, default_flow_style=True, width=10**6).strip()
        lines.append(f"config={dumped}")
        return lines

    # -- simulation pieces -------------------------------------------------

    def clocks(self) -> tuple[ClockModel, tuple[ClockModel, ...]]:
        return (
            self.master_clock.with_noise(self.noise),
            tuple(c.with_noise(self.noise) for c in self.anchor_clocks),
        )

    def sync_round(self, k: int) -> list[SyncState]:
        """Anchor states from the sync messages sent at ``k`` and ``k + 1`` intervals.

        Both messages are single broadcasts, so every anchor sees the same
        master stamps.
        """
        master, anchors = self.clocks()
        rng = stream(self.seed, _SYNC, k)
        tx = np.array([Time(k * self.sync_interval), Time((k + 1) * self.sync_interval)])
        m = read_measured(master, tx, rng)
        out = []
        for i, clock in enumerate(anchors, start=1):
            tof_im = self.geometry.baseline_tof(i)
            a = read_measured(clock, tx + Time(tof_im), rng)
            obs = SyncObservation(m[0], m[1], a[0], a[1], tof_im)
            out.append(solve_sync(obs, clock.rate, self.averaged_sync))
        return out

    def sync_epoch(self, cycle_start: float) -> int:
        """Index of the sync round whose state is in force at ``cycle_start``."""
        k = int(math.floor(float(cycle_start) / self.sync_interval)) - 1
        if k < 0:
            raise ValueError("no sync state before the first sync pair completes")
        return k

    def budget(self, anchor_id: int, cycle_start: float, tag_clock: ClockModel | None = None) -> NoiseBudget:
        """Noise budget of one anchor for the cycle starting at ``cycle_start``."""
        sigma = self.noise.sigma
        k = self.sync_epoch(cycle_start)
        return NoiseBudget(
            sigma_ts_m=sigma,
            sigma_ts_i=sigma,
            sigma_ts=sigma,
            sync_gap=self.sync_interval,
            slot_offset=self.schedule.slot_offsets[anchor_id - 1],
            pair_gap=self.schedule.pair_gaps[anchor_id - 1],
            t_bar=k * self.sync_interval,
            t_m=cycle_start + self.schedule.master_first_tx,
            tof_im=self.geometry.baseline_tof(anchor_id),
            master_offset=self.master_clock.offset,
            master_rate=self.master_clock.rate,
            anchor_rate=self.anchor_clocks[anchor_id - 1].rate,
            tag_rate=1.0 if tag_clock is None else tag_clock.rate,
            c=self.geometry.c,
        )

    def predicted_variance(self, anchor_id: int, cycle_start: float, tag_clock: ClockModel) -> float:
        """Closed-form range-difference variance for one anchor at one cycle."""
        if self.noise.sigma == 0.0:
            return 0.0
        return max(var_lambda(self.budget(anchor_id, cycle_start, tag_clock)), 0.0)


class _Runner:
    """Shared cycle loop with cached sync rounds."""

    def __init__(self, scenario: Scenario, weighted: bool = True):
        self.sc = scenario
        self.weighted = weighted
        self.master, self.anchors = scenario.clocks()
        self._sync: dict[int, list[SyncState]] = {}

    def sync(self, cycle_start: float) -> list[SyncState]:
        k = self.sc.sync_epoch(cycle_start)
        if k not in self._sync:
            self._sync = {k: self.sc.sync_round(k)}
        return self._sync[k]

    def cycle_start(self, n: int) -> Time:
        return Time(self.sc.start_time) + Time(n) * Time(self.sc.cycle_period)

    def broadcast(self, n: int) -> list[Transmission]:
        start = self.cycle_start(n)
        rng = None if self.sc.noise.distribution is Distribution.NONE else stream(self.sc.seed, _CYCLE, n)
        return broadcast(self.anchors, self.master, self.sc.schedule, self.sync(start), rng, start)

    def fix(self, sent: Sequence[Transmission], n: int, tag: TagState, tag_index: int, guess=None):
        """Receive one cycle for one tag and solve; returns the fix."""
        sc = self.sc
        start = self.cycle_start(n)
        rng = None if sc.noise.distribution is Distribution.NONE else stream(sc.seed, _TAG, tag_index, n)
        frames = receive(sent, sc.geometry, tag, rng, start, sc.schedule.guard, sc.bias)
        meas = cycle_measurements(frames, sc.geometry.c, sc.tag_rate_source)
        if self.weighted:
            meas = [
                DtdoaMeasurement(m.anchor_id, m.value, sc.predicted_variance(m.anchor_id, float(start), tag.clock))
                for m in meas
            ]
        return solve(meas, sc.geometry, initial_guess=guess)


def _tag_state(scenario: Scenario, index: int, t: float) -> TagState:
    pos, vel = scenario.tags[index].state(t)
    return TagState(pos, vel, scenario.tag_clocks[index].with_noise(scenario.noise))


# -- static ------------------------------------------------------------------


@dataclass(frozen=True)
class StaticResult:
    """Position errors ``fix - truth`` per static tag, with failure counts."""

    names: tuple[str, ...]
    truth: tuple[np.ndarray, ...]
    errors: tuple[np.ndarray, ...]
    failures: tuple[dict[str, int], ...]

    def max_abs_error(self) -> float:
        return max(float(np.max(np.abs(e))) if e.size else 0.0 for e in self.errors)

    def histogram(self, bins: int = 41, limit: float | None = None) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """Shared edges and counts per ``name/axis``."""
        if limit is None:
            limit = max(self.max_abs_error(), 1e-12)
        edges = np.linspace(-limit, limit, bins + 1)
        counts = {}
        for name, err in zip(self.names, self.errors):
            for k, axis in enumerate("xy"):
                counts[f"{name}/{axis}"] = np.histogram(err[:, k], edges)[0] if err.size else np.zeros(bins, int)
        return edges, counts

    def summary_csv(self, header: Sequence[str] = ()) -> str:
        buf = _csv_start(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tag", "axis", "n", "failures", "mean_m", "std_m", "max_abs_m"])
        for name, err, fail in zip(self.names, self.errors, self.failures):
            for k, axis in enumerate("xy"):
                col = err[:, k] if err.size else np.zeros(0)
                std = float(np.std(col, ddof=1)) if len(col) > 1 else 0.0
                mean = float(np.mean(col)) if len(col) else 0.0
                mx = float(np.max(np.abs(col))) if len(col) else 0.0
                w.writerow([name, axis, len(col), sum(fail.values()), _f(mean), _f(std), _f(mx)])
        return buf.getvalue()

    def histogram_csv(self, header: Sequence[str] = (), bins: int = 41) -> str:
        edges, counts = self.histogram(bins)
        buf = _csv_start(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tag", "axis", "bin_lo_m", "bin_hi_m", "count"])
        for key, cnt in counts.items():
            name, axis = key.rsplit("/", 1)
            for j, c in enumerate(cnt):
                w.writerow([name, axis, _f(edges[j]), _f(edges[j + 1]), int(c)])
        return buf.getvalue()

    def histogram_svg(self, bins: int = 41) -> str:
        edges, counts = self.histogram(bins)
        return histograms(edges, {k: list(map(int, v)) for k, v in counts.items()}, "Static tag position error", "error [m]")


def run_static(scenario: Scenario, repetitions: int, weighted: bool = True) -> StaticResult:
    """One protocol cycle and one fix per repetition for every static tag.

    Solver failures are counted by error code and excluded from the errors.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    idx = [k for k, t in enumerate(scenario.tags) if t.static]
    if not idx:
        raise ConfigError("the scenario has no static tags")
    runner = _Runner(scenario, weighted)
    tags = [_tag_state(scenario, k, 0.0) for k in idx]
    errs: list[list[np.ndarray]] = [[] for _ in idx]
    fails: list[dict[str, int]] = [{} for _ in idx]
    for n in range(repetitions):
        sent = runner.broadcast(n)
        for j, (k, tag) in enumerate(zip(idx, tags)):
            try:
                f = runner.fix(sent, n, tag, k)
            except DtdoaError as exc:
                fails[j][exc.code] = fails[j].get(exc.code, 0) + 1
                continue
            errs[j].append(f.position - tag.position)
    return StaticResult(
        names=tuple(scenario.tags[k].name for k in idx),
        truth=tuple(t.position for t in tags),
        errors=tuple(np.array(e).reshape(-1, 2) for e in errs),
        failures=tuple(fails),
    )


# -- walk --------------------------------------------------------------------


@dataclass(frozen=True)
class WalkPoint:
    cycle: int
    t: float
    truth: np.ndarray
    fix: np.ndarray | None
    error_code: str = ""


@dataclass(frozen=True)
class WalkResult:
    name: str
    planned: tuple[tuple[float, float], ...]
    points: tuple[WalkPoint, ...]

    def fixes(self) -> np.ndarray:
        return np.array([p.fix for p in self.points if p.fix is not None]).reshape(-1, 2)

    def errors(self) -> np.ndarray:
        return np.array([np.hypot(*(p.fix - p.truth)) for p in self.points if p.fix is not None])

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = _csv_start(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "t_s", "true_x_m", "true_y_m", "fix_x_m", "fix_y_m", "error_m", "error_code"])
        for p in self.points:
            if p.fix is None:
                w.writerow([p.cycle, _f(p.t), _f(p.truth[0]), _f(p.truth[1]), "nan", "nan", "nan", p.error_code])
            else:
                err = float(np.hypot(*(p.fix - p.truth)))
                w.writerow([p.cycle, _f(p.t), _f(p.truth[0]), _f(p.truth[1]), _f(p.fix[0]), _f(p.fix[1]), _f(err), ""])
        return buf.getvalue()

    def to_svg(self, nodes: Sequence[Sequence[float]] = ()) -> str:
        return track(self.planned, [tuple(p) for p in self.fixes()], f"Walking test ({self.name})", nodes)


def run_walk(scenario: Scenario, tag: str | int | None = None, weighted: bool = True) -> WalkResult:
    """Fix the moving tag once per cycle for ``duration`` seconds.

    Time ``t`` in the output counts from the start of the walk; the truth is
    the tag position at the start of each cycle.
    """
    if tag is None:
        moving = [k for k, t in enumerate(scenario.tags) if not t.static]
        k = moving[0] if moving else 0
    elif isinstance(tag, str):
        names = [t.name for t in scenario.tags]
        if tag not in names:
            raise ConfigError(f"unknown tag {tag!r}")
        k = names.index(tag)
    else:
        k = tag
    runner = _Runner(scenario, weighted)
    cycles = max(1, int(math.floor(scenario.duration / scenario.cycle_period)))
    points = []
    guess = None
    for n in range(cycles):
        t = n * scenario.cycle_period
        state = _tag_state(scenario, k, t)
        sent = runner.broadcast(n)
        try:
            f = runner.fix(sent, n, state, k, guess)
        except DtdoaError as exc:
            points.append(WalkPoint(n, t, state.position, None, exc.code))
            continue
        guess = f.position
        points.append(WalkPoint(n, t, state.position, f.position))
    return WalkResult(scenario.tags[k].name, scenario.tags[k].waypoints, tuple(points))


# -- scalability -------------------------------------------------------------


@dataclass(frozen=True)
class ScalabilityRow:
    tags: int
    cycle_duration: float
    fixes_per_second_per_tag: float
    fixes: int
    failures: int
    rms_error: float


def _room_bounds(geometry: NetworkGeometry) -> tuple[np.ndarray, np.ndarray]:
    nodes = np.vstack([geometry.master[None, :], geometry.anchors])
    return nodes.min(axis=0), nodes.max(axis=0)


def run_scalability(scenario: Scenario, tag_counts: Sequence[int], weighted: bool = False) -> list[ScalabilityRow]:
    """Serve ``N`` static tags from one broadcast cycle, for each ``N``.

    Tags are placed uniformly inside the anchors' bounding box (inset by
    10 %). The cycle duration is read off the transmitted frames: the gap
    between the master's first frame in two consecutive cycles.
    """
    if not tag_counts:
        raise ConfigError("at least one tag count is required")
    if any(int(n) < 1 for n in tag_counts):
        raise ConfigError("tag counts must be >= 1")
    runner = _Runner(scenario, weighted)
    first, second = runner.broadcast(0), runner.broadcast(1)
    duration = float(second[0].t_send - first[0].t_send)
    lo, hi = _room_bounds(scenario.geometry)
    inset = 0.1 * (hi - lo)
    rows = []
    for count in map(int, tag_counts):
        rng = stream(scenario.seed, _PLACEMENT, count)
        positions = rng.uniform(lo + inset, hi - inset, size=(count, 2))
        rates = 1.0 + rng.uniform(-1, 1, size=count) * _ppm_of(scenario)
        sq, ok, bad = 0.0, 0, 0
        for j, (pos, rate) in enumerate(zip(positions, rates)):
            tag = TagState(pos, clock=ClockModel(0.0, float(rate), scenario.noise))
            try:
                f = runner.fix(first, 0, tag, 1000 + j)
            except DtdoaError:
                bad += 1
                continue
            ok += 1
            sq += float(np.sum((f.position - pos) ** 2))
        rows.append(ScalabilityRow(count, duration, 1.0 / duration, ok, bad, math.sqrt(sq / ok) if ok else math.nan))
    return rows


def _ppm_of(scenario: Scenario) -> float:
    return float(scenario.config.get("clocks", {}).get("rate_ppm", 0.0)) * 1e-6


def scalability_csv(rows: Sequence[ScalabilityRow], header: Sequence[str] = ()) -> str:
    buf = _csv_start(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tags", "cycle_duration_s", "fixes_per_second_per_tag", "fixes", "failures", "rms_error_m"])
    for r in rows:
        w.writerow([r.tags, _f(r.cycle_duration), _f(r.fixes_per_second_per_tag), r.fixes, r.failures, _f(r.rms_error)])
    return buf.getvalue()


# -- construction ------------------------------------------------------------


def _f(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.16e}"


def _csv_start(header: Sequence[str]) -> io.StringIO:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    return buf


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def default_config(seed: int = 0) -> dict[str, Any]:
    """The built-in 10 m x 8 m room with six wall anchors."""
    return {
        "seed": seed,
        "duration": 10.0,
        "geometry": {"master": list(DEFAULT_MASTER), "anchors": [list(a) for a in DEFAULT_ANCHORS]},
        "clocks": {"rate_ppm": 3.0, "offset_range": 1e-3},
        "noise": {"distribution": "uniform", "scale": TICK_S, "quantize": None},
        "schedule": {"kind": "default"},
        "sync": {"interval": 10.0, "averaged": True},
        "tags": [{"name": n, "position": list(p)} for n, p in DEFAULT_STATIC.items()]
        + [{"name": "walk", "waypoints": [list(p) for p in DEFAULT_WALK], "speed": 1.5}],
        "tag_rate_source": "anchor",
        "placeholder_positions": True,
    }


def _get(cfg: Mapping, key: str, kind, default=None, required: bool = False):
    if key not in cfg or cfg[key] is None:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value = cfg[key]
    try:
        if kind is float:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            return int(value)
        if kind is bool:
            if not isinstance(value, bool):
                raise ValueError
            return value
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r} has an invalid value {value!r}") from None


def _points(value, what: str) -> list[tuple[float, float]]:
    try:
        pts = [(float(p[0]), float(p[1])) for p in value]
        if any(len(p) != 2 for p in value):
            raise ValueError
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"{what} must be a list of [x, y] pairs") from None
    return pts


def _clock(cfg: Mapping) -> ClockModel:
    try:
        return ClockModel(_get(cfg, "offset", float, 0.0), _get(cfg, "rate", float, 1.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _schedule(cfg: Mapping, n: int) -> BroadcastSchedule:
    kind = cfg.get("kind", "default")
    opts = {k: _get(cfg, k, float) for k in ("slot_spacing", "pair_gap", "guard", "idle_tail") if k in cfg}
    try:
        if kind == "default":
            opts.pop("pair_gap", None)
            return BroadcastSchedule.default(n, **opts)
        if kind == "back_to_back":
            return BroadcastSchedule.back_to_back(n, **opts)
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from None
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _noise(cfg: Mapping) -> NoiseSpec:
    try:
        dist = Distribution(cfg.get("distribution", "none"))
        return NoiseSpec(dist, _get(cfg, "scale", float, 0.0), _get(cfg, "quantize", float))
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None


def scenario_from_config(cfg: Mapping[str, Any]) -> Scenario:
    """Build a scenario; random clock parameters come from the seed."""
    if not isinstance(cfg, Mapping):
        raise ConfigError("scenario must be a mapping")
    seed = _get(cfg, "seed", int, required=True)
    if seed < 0:
        raise ConfigError("seed must be non-negative")
    geo = cfg.get("geometry") or {}
    if "anchors" not in geo or not geo["anchors"]:
        raise ConfigError("geometry needs at least one anchor")
    try:
        geometry = NetworkGeometry(
            _points([geo.get("master", DEFAULT_MASTER)], "geometry.master")[0],
            _points(geo["anchors"], "geometry.anchors"),
            _get(geo, "c", float, SPEED_OF_LIGHT),
        )
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from None
    n = geometry.n_anchors

    clocks = cfg.get("clocks") or {}
    ppm = _get(clocks, "rate_ppm", float, 0.0) * 1e-6
    span = _get(clocks, "offset_range", float, 0.0)
    ntags = len(cfg.get("tags") or [])
    rng = stream(seed, _CLOCKS)
    drawn = [
        ClockModel(float(o), float(1.0 + r))
        for o, r in zip(rng.uniform(-span, span, n + 1 + ntags), rng.uniform(-ppm, ppm, n + 1 + ntags))
    ]
    master = _clock(clocks["master"]) if "master" in clocks else drawn[0]
    if "anchors" in clocks:
        if len(clocks["anchors"]) != n:
            raise ConfigError("clocks.anchors needs one entry per anchor")
        anchors = tuple(_clock(c) for c in clocks["anchors"])
    else:
        anchors = tuple(drawn[1 : n + 1])

    tags, tag_clocks = [], []
    for j, t in enumerate(cfg.get("tags") or []):
        name = str(t.get("name", f"tag{j + 1}"))
        if "position" in t:
            spec = TagSpec(name, tuple(_points([t["position"]], f"tags[{j}].position")))
        elif "waypoints" in t:
            spec = TagSpec(name, tuple(_points(t["waypoints"], f"tags[{j}].waypoints")), _get(t, "speed", float, 0.0))
        else:
            raise ConfigError(f"tags[{j}] needs a position or waypoints")
        tags.append(spec)
        tag_clocks.append(_clock(t["clock"]) if "clock" in t else drawn[n + 1 + j])

    bias = cfg.get("bias")
    if bias is not None:
        try:
            bias = tuple(float(b) for b in bias)
        except (TypeError, ValueError):
            raise ConfigError("bias must be a list of numbers") from None
    sync = cfg.get("sync") or {}
    return Scenario(
        geometry=geometry,
        schedule=_schedule(cfg.get("schedule") or {}, n),
        master_clock=master,
        anchor_clocks=anchors,
        tag_clocks=tuple(tag_clocks),
        tags=tuple(tags),
        noise=_noise(cfg.get("noise") or {}),
        sync_interval=_get(sync, "interval", float, 10.0),
        averaged_sync=_get(sync, "averaged", bool, True),
        duration=_get(cfg, "duration", float, 10.0),
        bias=bias,
        seed=seed,
        tag_rate_source=str(cfg.get("tag_rate_source", "anchor")),
        placeholder_positions=_get(cfg, "placeholder_positions", bool, False),
        config=dict(cfg),
    )


def default_scenario(seed: int = 0, **overrides: Any) -> Scenario:
    cfg = default_config(seed)
    cfg.update(overrides)
    return scenario_from_config(cfg)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigNotFoundError(f"scenario file not found: {path}")
    try:
        cfg = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}".replace("\n", " "), code="CONFIG_PARSE") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}", code="IO_ERROR") from None
    return scenario_from_config(cfg)


def dump_config(cfg: Mapping[str, Any]) -> str:
    return yaml.safe_dump(_plain(cfg), sort_keys=False)
