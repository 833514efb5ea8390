"""Downlink broadcast schedule and DTDoA measurement engine.

Per cycle the master and then every anchor transmit a pair of frames.
Each frame carries its transmit time on the master timescale (anchors
convert their own stamps with their sync state). The tag stamps arrivals
with its own clock and turns every anchor/master pair into a range
difference in meters.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .clocks import ClockModel, Time, read_measured
from .errors import ScheduleOverlapError
from .geometry import NetworkGeometry, TagState, distance, propagate
from .rng import RandomStream
from .sync import SyncState, estimate_tag_rate, to_master_timescale

MASTER = 0


class Pair(IntEnum):
    FIRST = 0
    SECOND = 1


@dataclass(frozen=True)
class BroadcastSchedule:
    """Transmit times within one cycle, relative to the cycle start.

    ``slot_offsets[k]`` is the first transmit time of anchor ``k + 1``
    measured from the master's first transmission.
    """

    slot_offsets: tuple[float, ...]
    pair_gaps: tuple[float, ...]
    master_pair_gap: float = 200e-6
    master_first_tx: float = 0.0
    cycle_period: float = 15e-3
    guard: float = 50e-6

    def __post_init__(self) -> None:
        object.__setattr__(self, "slot_offsets", tuple(float(s) for s in self.slot_offsets))
        object.__setattr__(self, "pair_gaps", tuple(float(g) for g in self.pair_gaps))
        if len(self.slot_offsets) != len(self.pair_gaps):
            raise ValueError("one pair gap per anchor slot is required")
        if len(self.slot_offsets) < 1:
            raise ValueError("a schedule needs at least one anchor")
        if any(s <= 0 for s in self.slot_offsets):
            raise ValueError("anchor slot offsets must be positive")
        if len(set(self.slot_offsets)) != len(self.slot_offsets):
            raise ValueError("anchor slot offsets must be distinct")
        if min(self.pair_gaps + (self.master_pair_gap,)) <= 0:
            raise ValueError("pair gaps must be positive")
        times = sorted(t for _, _, t in self.transmissions())
        if any(b - a < self.guard for a, b in zip(times, times[1:])):
            raise ScheduleOverlapError("two transmissions fall within the guard time")
        if self.cycle_period <= times[-1] - self.master_first_tx:
            raise ValueError("cycle period must exceed the last transmission")

    @classmethod
    def default(
        cls,
        n_anchors: int,
        slot_spacing: float = 1e-3,
        guard: float = 50e-6,
        idle_tail: float = 1e-3,
    ) -> BroadcastSchedule:
        """Two rounds: every node sends its first frame, then every node its second.

        Node ``k`` (master = 0) transmits at ``k * slot_spacing`` and again one
        round later, so each pair gap equals the round length and exceeds
        every slot offset. Six anchors give a 15 ms cycle (about 67 Hz).
        """
        if n_anchors < 1:
            raise ValueError("a schedule needs at least one anchor")
        round_length = (n_anchors + 1) * slot_spacing
        return cls(
            slot_offsets=tuple(slot_spacing * k for k in range(1, n_anchors + 1)),
            pair_gaps=(round_length,) * n_anchors,
            master_pair_gap=round_length,
            cycle_period=2 * round_length + idle_tail,
            guard=guard,
        )

    @classmethod
    def back_to_back(
        cls,
        n_anchors: int,
        slot_spacing: float = 400e-6,
        pair_gap: float = 200e-6,
        guard: float = 50e-6,
        idle_tail: float = 0.0,
    ) -> BroadcastSchedule:
        """Each node sends its two frames ``pair_gap`` apart before the next node starts."""
        if n_anchors < 1:
            raise ValueError("a schedule needs at least one anchor")
        return cls(
            slot_offsets=tuple(slot_spacing * k for k in range(1, n_anchors + 1)),
            pair_gaps=(pair_gap,) * n_anchors,
            master_pair_gap=pair_gap,
            cycle_period=(n_anchors + 1) * slot_spacing + idle_tail,
            guard=guard,
        )

    @property
    def n_anchors(self) -> int:
        return len(self.slot_offsets)

    @property
    def update_rate(self) -> float:
        return 1.0 / self.cycle_period

    def transmissions(self) -> list[tuple[int, Pair, float]]:
        """(source, pair, send time within the cycle) in transmit order."""
        out = [
            (MASTER, Pair.FIRST, self.master_first_tx),
            (MASTER, Pair.SECOND, self.master_first_tx + self.master_pair_gap),
        ]
        for k, (slot, gap) in enumerate(zip(self.slot_offsets, self.pair_gaps), start=1):
            start = self.master_first_tx + slot
            out.append((k, Pair.FIRST, start))
            out.append((k, Pair.SECOND, start + gap))
        out.sort(key=lambda item: item[2])
        return out


@dataclass(frozen=True)
class ReceivedFrame:
    source: int
    pair: Pair
    tx_master_ts: float
    rx_tag_ts: float


@dataclass(frozen=True)
class DtdoaMeasurement:
    """One range difference (anchor minus master) in meters.

    ``ideal`` and ``bias`` hold the noiseless decomposition
    ``rate * (rho_i - rho_m)`` and ``-c * tag_rate * residual`` when the
    simulator knows them.
    """

    anchor_id: int
    value: float
    predicted_variance: float = 0.0
    ideal: float | None = None
    bias: float | None = None
    pair: Pair = Pair.FIRST

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError("measurement value must be finite")
        if self.predicted_variance < 0:
            raise ValueError("predicted variance must be >= 0")


@dataclass(frozen=True)
class Transmission:
    """A broadcast frame as sent: ideal send time and master-timescale stamp."""

    source: int
    pair: Pair
    t_send: Time
    tx_master_ts: Time


def _reader(rng: RandomStream | None):
    def read(clock: ClockModel, t):
        return clock.stamp(t) if rng is None else read_measured(clock, t, rng)

    return read


def broadcast(
    anchor_clocks: Sequence[ClockModel],
    master_clock: ClockModel,
    schedule: BroadcastSchedule,
    sync: Sequence[SyncState],
    rng: RandomStream | None,
    cycle_start: float = 0.0,
) -> list[Transmission]:
    """Transmit side of one cycle; shared by every tag that listens."""
    if len(anchor_clocks) != schedule.n_anchors or len(sync) != schedule.n_anchors:
        raise ValueError("one clock and one sync state per anchor are required")
    read = _reader(rng)
    out = []
    for source, pair, offset in schedule.transmissions():
        t_send = Time(cycle_start) + Time(offset)
        if source == MASTER:
            tx = read(master_clock, t_send)
        else:
            tx = to_master_timescale(read(anchor_clocks[source - 1], t_send), sync[source - 1])
        out.append(Transmission(source, pair, t_send, tx))
    return out


def receive(
    transmissions: Sequence[Transmission],
    geometry: NetworkGeometry,
    tag: TagState,
    rng: RandomStream | None,
    cycle_start: float = 0.0,
    guard: float = 0.0,
    path_bias: Sequence[float] | None = None,
) -> list[ReceivedFrame]:
    """Receive side of one cycle for one tag.

    ``tag`` is the state at ``cycle_start``; the tag keeps moving while frames
    arrive. ``path_bias[k]`` adds extra path length (meters) to anchor
    ``k + 1``'s frames.
    """
    read = _reader(rng)
    frames, arrivals = [], []
    for tx in transmissions:
        here = propagate(tag, float(tx.t_send - Time(cycle_start))).position
        path = distance(here, geometry.node(tx.source))
        if path_bias is not None and tx.source != MASTER:
            path += path_bias[tx.source - 1]
        t_arrive = tx.t_send + Time(path / geometry.c)
        frames.append(ReceivedFrame(tx.source, tx.pair, tx.tx_master_ts, read(tag.clock, t_arrive)))
        arrivals.append(t_arrive)
    arrivals.sort()
    if any(b - a < guard for a, b in zip(arrivals, arrivals[1:])):
        raise ScheduleOverlapError("two frames arrive within the guard time")
    return frames


def simulate_cycle(
    geometry: NetworkGeometry,
    anchor_clocks: Sequence[ClockModel],
    master_clock: ClockModel,
    tag: TagState,
    schedule: BroadcastSchedule,
    sync: Sequence[SyncState],
    rng: RandomStream | None,
    cycle_start: float = 0.0,
    path_bias: Sequence[float] | None = None,
) -> list[ReceivedFrame]:
    """Frames one tag receives during a cycle starting at ideal ``cycle_start``.

    With ``rng=None`` every stamp is exact.
    """
    if schedule.n_anchors != geometry.n_anchors:
        raise ValueError("schedule and geometry disagree on the anchor count")
    sent = broadcast(anchor_clocks, master_clock, schedule, sync, rng, cycle_start)
    return receive(sent, geometry, tag, rng, cycle_start, schedule.guard, path_bias)


def protocol_interval(frame_anchor: ReceivedFrame, frame_master: ReceivedFrame, tag_rate):
    """Master-timescale gap between the two transmissions, scaled to the tag clock."""
    return tag_rate * (frame_anchor.tx_master_ts - frame_master.tx_master_ts)


def compute_dtdoa(
    frame_anchor: ReceivedFrame,
    frame_master: ReceivedFrame,
    g,
    c: float,
) -> DtdoaMeasurement:
    if frame_anchor.pair != frame_master.pair:
        raise ValueError("frames must come from the same pair index")
    value = dtdoa_value(frame_anchor.rx_tag_ts, frame_master.rx_tag_ts, g, c)
    return DtdoaMeasurement(frame_anchor.source, float(value), pair=frame_anchor.pair)


def dtdoa_value(rx_anchor, rx_master, g, c: float):
    """``c * (rx_anchor - rx_master - g)``; elementwise on arrays."""
    return c * ((rx_anchor - rx_master) - g)


def ideal_tdoa(tag: TagState, anchor, geometry: NetworkGeometry) -> float:
    """Range difference a tag would see if master and anchor sent simultaneously."""
    return tag.clock.rate * (distance(tag.position, anchor) - distance(tag.position, geometry.master))


def index_frames(frames: Iterable[ReceivedFrame]) -> dict[tuple[int, Pair], ReceivedFrame]:
    return {(f.source, f.pair): f for f in frames}


def tag_rate_from(frames: Mapping[tuple[int, Pair], ReceivedFrame], source: int):
    first, second = frames[(source, Pair.FIRST)], frames[(source, Pair.SECOND)]
    return estimate_tag_rate(first.rx_tag_ts, second.rx_tag_ts, first.tx_master_ts, second.tx_master_ts)


def cycle_measurements(
    frames: Iterable[ReceivedFrame],
    c: float,
    tag_rate_source: str = "master",
    pair: Pair = Pair.FIRST,
) -> list[DtdoaMeasurement]:
    """One range difference per anchor from a cycle's frames.

    ``tag_rate_source`` is ``"master"`` to syntonize the tag on the master's
    own pair, or ``"anchor"`` to use each anchor's pair for its measurement.
    """
    if tag_rate_source not in ("master", "anchor"):
        raise ValueError(f"unknown tag rate source {tag_rate_source!r}")
    by_key = index_frames(frames)
    master_rate = tag_rate_from(by_key, MASTER)
    out = []
    anchors = sorted({src for src, _ in by_key if src != MASTER})
    for k in anchors:
        rate = master_rate if tag_rate_source == "master" else tag_rate_from(by_key, k)
        fa, fm = by_key[(k, pair)], by_key[(MASTER, pair)]
        out.append(compute_dtdoa(fa, fm, protocol_interval(fa, fm, rate), c))
    return out


def _sci18(x) -> str:
    return np.format_float_scientific(Time(x), precision=17, unique=False)


FRAME_COLUMNS = ("cycle", "source", "pair", "tx_master_ts_s", "rx_tag_ts_s")


def frames_to_csv(cycles: Iterable[Sequence[ReceivedFrame]], header: Sequence[str] = ()) -> str:
    """Frame log with 18 significant digits per timestamp."""
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FRAME_COLUMNS)
    for n, frames in enumerate(cycles):
        for f in frames:
            writer.writerow([n, f.source, int(f.pair), _sci18(f.tx_master_ts), _sci18(f.rx_tag_ts)])
    return buf.getvalue()


def frames_from_csv(text: str) -> list[list[ReceivedFrame]]:
    rows = csv.DictReader(line for line in text.splitlines() if not line.startswith("#"))
    cycles: dict[int, list[ReceivedFrame]] = {}
    for row in rows:
        frame = ReceivedFrame(
            int(row["source"]), Pair(int(row["pair"])), Time(row["tx_master_ts_s"]), Time(row["rx_tag_ts_s"])
        )
        cycles.setdefault(int(row["cycle"]), []).append(frame)
    return [cycles[k] for k in sorted(cycles)]
