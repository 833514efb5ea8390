from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwb_dtdoa.clocks import ClockModel, NoiseSpec, Time, read_ideal
from uwb_dtdoa.errors import ZeroIntervalError
from uwb_dtdoa.geometry import SPEED_OF_LIGHT
from uwb_dtdoa.rng import stream
from uwb_dtdoa.sync import (
    SyncObservation,
    SyncState,
    average_rel_offset,
    conversion_residual,
    estimate_rel_offset,
    estimate_rel_rate,
    estimate_tag_rate,
    observe_sync,
    solve_sync,
    synchronize,
    to_master_timescale,
)

ppm = st.floats(-20e-6, 20e-6)
ms = st.floats(-1e-3, 1e-3)


def test_rel_rate_identity():
    obs = observe_sync(ClockModel(), ClockModel(), 1e-8, 0.0, 1.0)
    assert estimate_rel_rate(obs) == 1.0


def test_rel_rate_of_fast_anchor():
    obs = observe_sync(ClockModel(), ClockModel(0.0, 1 + 2e-6), 1e-8, 0.0, 1.0)
    assert float(estimate_rel_rate(obs)) == pytest.approx(1.000002, abs=1e-15)


def test_rel_rate_zero_interval():
    obs = SyncObservation(1.0, 1.0, 2.0, 3.0, 0.0)
    with pytest.raises(ZeroIntervalError):
        estimate_rel_rate(obs)


def test_rel_offset_perfect_clocks():
    obs = observe_sync(ClockModel(), ClockModel(), 0.0, 0.0, 1.0)
    assert estimate_rel_offset(obs, estimate_rel_rate(obs)) == 0.0


def test_rel_offset_example():
    anchor = ClockModel(1e-3, 1 + 2e-6)
    obs = observe_sync(ClockModel(), anchor, 1.6678e-8, 0.0, 1.0)
    offset = estimate_rel_offset(obs, estimate_rel_rate(obs))
    assert float(offset) == pytest.approx(1e-3 + 2e-6 * 1.6678e-8, abs=1e-19)


@given(ms, ppm, ms, ppm, st.floats(0, 1e-7), st.floats(0, 100), st.floats(1e-3, 10))
def test_offset_constancy_and_exactness(om, dm, oi, di, tof_im, t_bar, gap):
    master, anchor = ClockModel(om, 1 + dm), ClockModel(oi, 1 + di)
    obs = observe_sync(master, anchor, tof_im, t_bar, gap)
    rate = estimate_rel_rate(obs)
    assert float(rate) == pytest.approx(anchor.rate / master.rate, rel=1e-12)
    first = estimate_rel_offset(obs, rate)
    second = estimate_rel_offset(obs, rate, delayed=True)
    # extended-precision rounding of the stamps, amplified by t_bar / gap through the rate
    tol = 1e-18 * (1 + t_bar) * (1 + (t_bar + gap) / gap)
    assert abs(float(first - second)) < tol
    expected = Time(oi) - rate * Time(om) - (1 - Time(anchor.rate)) * Time(tof_im)
    assert abs(float(first - expected)) < tol


def test_average_rel_offset():
    assert average_rel_offset(5e-4, 5e-4) == 5e-4
    assert average_rel_offset(4e-4, 6e-4) == pytest.approx(5e-4)


def test_to_master_identity():
    assert to_master_timescale(3.25, SyncState(1.0, 0.0)) == 3.25


@given(ms, ppm, ms, ppm, st.floats(1e-9, 1e-7), st.floats(0, 50), st.floats(0, 30))
def test_conversion_residual_exact(om, dm, oi, di, tof_im, t_bar, later):
    master, anchor = ClockModel(om, 1 + dm), ClockModel(oi, 1 + di)
    state = synchronize(master, anchor, tof_im, t_bar, 1.0)
    t = Time(t_bar) + Time(later)
    err = to_master_timescale(read_ideal(anchor, t), state) - read_ideal(master, t)
    expected = conversion_residual(anchor.rate, float(state.rel_rate), tof_im)
    # machine precision relative to the timestamp magnitude
    assert abs(float(err) - expected) < 1e-12 * tof_im + 1e-18 * (1 + t_bar + later) ** 2
    assert float(state.residual) == pytest.approx(expected)


def test_unit_rate_anchor_has_no_residual():
    state = synchronize(ClockModel(1e-4, 1 + 3e-6), ClockModel(2e-4, 1.0), 5e-8, 0.0, 1.0)
    assert state.residual == 0.0


def test_tag_rate_static():
    assert estimate_tag_rate(1.0, 2.0, 5.0, 6.0) == 1.0
    tag = ClockModel(0.0, 1 - 3e-6)
    tx = Time(2.0), Time(2.0) + Time(1e-3)
    rx = [read_ideal(tag, t + Time(3e-8)) for t in tx]
    assert float(estimate_tag_rate(rx[0], rx[1], *tx)) == pytest.approx(0.999997, abs=1e-13)


def test_tag_rate_zero_interval():
    with pytest.raises(ZeroIntervalError):
        estimate_tag_rate(1.0, 2.0, 3.0, 3.0)


def test_tag_rate_moving_toward_sender():
    c, speed, gap, nu = SPEED_OF_LIGHT, 2.0, 5e-3, 1 + 4e-6
    tag = ClockModel(0.0, nu)
    start = 20.0
    # distance to the sender shrinks by speed * gap between the two frames
    tx = Time(1.0), Time(1.0) + Time(gap)
    rx = [read_ideal(tag, tx[0] + Time(start / c)), read_ideal(tag, tx[1] + Time((start - speed * gap) / c))]
    rate = float(estimate_tag_rate(rx[0], rx[1], *tx))
    assert rate - nu == pytest.approx(-nu * speed / c, rel=1e-6)


@settings(max_examples=50)
@given(ms, ppm, ms, ppm, st.floats(0, 1e3))
def test_tag_rate_static_exactness(om, dm, ot, dt, t0):
    master, tag = ClockModel(om, 1 + dm), ClockModel(ot, 1 + dt)
    tx = Time(t0), Time(t0) + Time(2e-3)
    ts = [read_ideal(master, t) for t in tx]
    rx = [read_ideal(tag, t + Time(4e-8)) for t in tx]
    assert float(estimate_tag_rate(rx[0], rx[1], *ts)) == pytest.approx(tag.rate / master.rate, rel=1e-12)


def test_first_and_delayed_offsets_coincide_under_shared_rate():
    # with the rate taken from the same two messages, both offsets are algebraically equal
    master = ClockModel(0.0, 1.0, NoiseSpec.gaussian(1e-11))
    anchor = ClockModel(1e-4, 1 + 1e-6, NoiseSpec.gaussian(1e-11))
    obs = observe_sync(master, anchor, 1e-8, 1.0, 1.0, stream(9))
    rate = estimate_rel_rate(obs)
    first, second = estimate_rel_offset(obs, rate), estimate_rel_offset(obs, rate, delayed=True)
    assert abs(float(first - second)) < 1e-18


def test_single_pair_switch():
    master, anchor = ClockModel(0.0, 1.0), ClockModel(1e-4, 1 + 1e-6)
    rng_a, rng_b = stream(9), stream(9)
    noisy = NoiseSpec.gaussian(1e-11)
    averaged = synchronize(master.with_noise(noisy), anchor.with_noise(noisy), 1e-8, 1.0, 1.0, rng_a)
    single = synchronize(master.with_noise(noisy), anchor.with_noise(noisy), 1e-8, 1.0, 1.0, rng_b, averaged=False)
    assert averaged.rel_rate == single.rel_rate
    assert abs(float(averaged.rel_offset - single.rel_offset)) < 1e-18


def test_estimators_are_elementwise():
    obs = SyncObservation(np.array([0.0, 1.0]), np.array([1.0, 3.0]), np.array([0.5, 1.5]), np.array([1.5, 3.5]), 0.0)
    assert np.allclose(estimate_rel_rate(obs), [1.0, 1.0])
    state = solve_sync(obs, 1.0)
    assert np.allclose(state.rel_offset, [0.5, 0.5])


def test_sync_state_requires_positive_rate():
    with pytest.raises(ValueError):
        SyncState(0.0, 0.0)
