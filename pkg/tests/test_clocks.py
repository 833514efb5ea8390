from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uwb_dtdoa.clocks import (
    TICK_S,
    ClockModel,
    Distribution,
    NoiseSpec,
    Time,
    quantize,
    read_ideal,
    read_measured,
)
from uwb_dtdoa.rng import stream

rates = st.floats(1 - 1e-4, 1 + 1e-4)
offsets = st.floats(-1.0, 1.0)
times = st.floats(0.0, 1e3)


def test_read_ideal_identity_clock():
    assert read_ideal(ClockModel(0.0, 1.0), 5.0) == 5.0


def test_read_ideal_offset_and_rate():
    # 1e-3 + (1 + 2e-6) * 1.0
    value = read_ideal(ClockModel(1e-3, 1 + 2e-6), 1.0)
    assert float(value) == pytest.approx(1.001002, abs=1e-15)


def test_read_ideal_at_zero_returns_offset():
    assert read_ideal(ClockModel(-5e-4, 1.0), 0.0) == Time(-5e-4)


def test_read_ideal_keeps_extended_precision():
    # a 1 ps step on top of 100 s must survive the clock model
    clock = ClockModel(1e-3, 1 + 3e-6)
    step = read_ideal(clock, Time(100) + Time(1e-12)) - read_ideal(clock, Time(100))
    assert float(step) == pytest.approx((1 + 3e-6) * 1e-12, rel=1e-6)


def test_noiseless_measured_equals_ideal():
    clock = ClockModel(2e-4, 1 - 1e-6)
    rng = stream(0)
    t = np.linspace(0, 10, 7)
    assert np.array_equal(read_measured(clock, t, rng), read_ideal(clock, t))


def test_uniform_noise_statistics():
    clock = ClockModel(noise=NoiseSpec.uniform(TICK_S))
    draws = np.asarray(read_measured(clock, np.zeros(10_000), stream(3)), dtype=float)
    sigma = TICK_S / math.sqrt(3)
    assert abs(draws.mean()) < 3 * sigma / 100
    assert draws.std() == pytest.approx(9.035e-12, rel=0.05)
    assert np.all(np.abs(draws) <= TICK_S)


def test_gaussian_noise_statistics():
    spec = NoiseSpec.gaussian(5e-12)
    draws = spec.draw(stream(4), 20_000)
    assert draws.std() == pytest.approx(5e-12, rel=0.03)
    assert spec.sigma == 5e-12


def test_quantization_rounds_to_nearest_tick():
    tick = 15.65e-12
    clock = ClockModel(noise=NoiseSpec(quantize=tick))
    value = clock.stamp(7.0 * tick + 0.4 * tick)
    assert float(value) == pytest.approx(7 * tick, rel=1e-12)


@given(st.floats(-1e-6, 1e-6))
def test_quantization_error_bounded(x):
    tick = 15.65e-12
    assert abs(float(quantize(Time(x), tick) - Time(x))) <= tick / 2 * (1 + 1e-9)


def test_noise_is_white():
    draws = NoiseSpec.uniform(TICK_S).draw(stream(5), 100_000)
    lag1 = np.corrcoef(draws[:-1], draws[1:])[0, 1]
    assert abs(lag1) < 0.03


def test_successive_calls_draw_independent_noise():
    clock = ClockModel(noise=NoiseSpec.gaussian(1e-11))
    rng = stream(1)
    assert read_measured(clock, 1.0, rng) != read_measured(clock, 1.0, rng)


@given(offsets, rates, times, times)
def test_affinity(o, nu, t1, t2):
    clock = ClockModel(o, nu)
    lhs = read_ideal(clock, t2) - read_ideal(clock, t1)
    rhs = Time(nu) * (Time(t2) - Time(t1))
    assert abs(float(lhs - rhs)) <= 1e-15 * max(1.0, abs(t1), abs(t2))


@pytest.mark.parametrize("rate", [0.0, -1.0, 1.01])
def test_invalid_rates_rejected(rate):
    with pytest.raises(ValueError):
        ClockModel(0.0, rate)


def test_rate_guard_is_configurable():
    assert ClockModel(0.0, 1.01, max_rate_deviation=0.02).rate == 1.01


@pytest.mark.parametrize("kwargs", [{"scale": -1.0}, {"quantize": 0.0}, {"quantize": -1e-12}])
def test_invalid_noise_rejected(kwargs):
    with pytest.raises(ValueError):
        NoiseSpec(Distribution.UNIFORM, **kwargs)


def test_uniform_sigma_from_half_width():
    assert NoiseSpec.uniform(3.0).sigma == pytest.approx(math.sqrt(3.0))
