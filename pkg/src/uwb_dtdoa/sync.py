"""Anchor-to-master synchronization and tag syntonization.

The master sends two timestamped messages ``gap`` seconds apart; each
anchor stamps their arrival and derives its rate and offset relative to
the master. Anchor timestamps can then be mapped onto the master
timescale. The tag uses the same two-message trick to estimate its own
rate relative to the master.

All estimators are plain arithmetic and accept numpy arrays elementwise,
which the Monte Carlo module relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clocks import ClockModel, as_time, read_measured
from .errors import ZeroIntervalError
from .rng import RandomStream


def _interval(a, b):
    span = np.subtract(b, a)
    if np.any(span == 0):
        raise ZeroIntervalError("zero-length timestamp interval")
    return span


@dataclass(frozen=True)
class SyncObservation:
    """Master transmit stamps and anchor receive stamps of one sync exchange."""

    master_tx_1: float
    master_tx_2: float
    anchor_rx_1: float
    anchor_rx_2: float
    tof_im: float


@dataclass(frozen=True)
class SyncState:
    """Relative rate/offset of one anchor with respect to the master.

    ``residual`` is the conversion bias ``(1 - rate_i) / rel_rate * tof``
    left by the protocol; it is known only to a simulator and kept for
    diagnostics.
    """

    rel_rate: float
    rel_offset: float
    residual: float = 0.0

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.rel_rate) <= 0):
            raise ValueError("relative rate must be positive")


def estimate_rel_rate(obs: SyncObservation):
    return (obs.anchor_rx_2 - obs.anchor_rx_1) / _interval(obs.master_tx_1, obs.master_tx_2)


def estimate_rel_offset(obs: SyncObservation, rel_rate, delayed: bool = False):
    """Offset from the first message pair, or from the second when ``delayed``."""
    if delayed:
        return obs.anchor_rx_2 - rel_rate * obs.master_tx_2 - obs.tof_im
    return obs.anchor_rx_1 - rel_rate * obs.master_tx_1 - obs.tof_im


def average_rel_offset(first, second):
    return 0.5 * (first + second)


def to_master_timescale(anchor_ts, state: SyncState):
    return (anchor_ts - state.rel_offset) / state.rel_rate


def estimate_tag_rate(tag_rx_1, tag_rx_2, master_ts_1, master_ts_2):
    """Tag rate relative to the master from one sender's message pair.

    ``master_ts_*`` are the sender's transmit stamps on the master
    timescale (raw for the master, converted for anchors).
    """
    return (tag_rx_2 - tag_rx_1) / _interval(master_ts_1, master_ts_2)


def conversion_residual(anchor_rate: float, rel_rate: float, tof_im: float) -> float:
    return (1.0 - anchor_rate) / rel_rate * tof_im


def observe_sync(
    master: ClockModel,
    anchor: ClockModel,
    tof_im: float,
    t_bar: float,
    gap: float,
    rng: RandomStream | None = None,
) -> SyncObservation:
    """Timestamps of a sync exchange starting at ideal time ``t_bar``.

    Without ``rng`` the stamps are noiseless.
    """
    tx = as_time([t_bar, t_bar]) + as_time([0.0, gap])
    rx = tx + tof_im
    if rng is None:
        m, a = master.stamp(tx), anchor.stamp(rx)
    else:
        m, a = read_measured(master, tx, rng), read_measured(anchor, rx, rng)
    return SyncObservation(m[0], m[1], a[0], a[1], tof_im)


def solve_sync(obs: SyncObservation, anchor_rate: float, averaged: bool = True) -> SyncState:
    """Turn a sync exchange into a :class:`SyncState`.

    ``averaged`` selects the mean of both offset estimates instead of the
    first-pair estimate alone.
    """
    rate = estimate_rel_rate(obs)
    offset = estimate_rel_offset(obs, rate)
    if averaged:
        offset = average_rel_offset(offset, estimate_rel_offset(obs, rate, delayed=True))
    return SyncState(rate, offset, conversion_residual(anchor_rate, rate, obs.tof_im))


def synchronize(
    master: ClockModel,
    anchor: ClockModel,
    tof_im: float,
    t_bar: float,
    gap: float,
    rng: RandomStream | None = None,
    averaged: bool = True,
) -> SyncState:
    return solve_sync(observe_sync(master, anchor, tof_im, t_bar, gap, rng), anchor.rate, averaged)
