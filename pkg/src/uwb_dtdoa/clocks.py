"""Affine clock models with white timestamping noise.

A node clock reads ``offset + rate * t`` at ideal time ``t``. Measured
timestamps add an i.i.d. draw from the node's :class:`NoiseSpec` and are
optionally rounded to the counter tick afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .rng import RandomStream

TICK_S = 15.65e-12
"""Timestamp resolution of the reference radio (one counter tick)."""

Time = np.longdouble
"""Dtype for timestamps.

A 1e-9 m range difference is 3.3e-18 s, below the float64 spacing of a
10 ms timestamp, and the two-message rate estimate amplifies rounding by
the ratio of slot offset to pair gap. Extended precision keeps the
protocol arithmetic exact at that level.
"""


def as_time(t):
    return np.asarray(t, dtype=Time)[()]


class Distribution(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class NoiseSpec:
    """Timestamping noise of one node.

    ``scale`` is the standard deviation for Gaussian noise and the
    half-width for uniform noise. ``quantize`` is an optional tick size
    applied after the noise.
    """

    distribution: Distribution = Distribution.NONE
    scale: float = 0.0
    quantize: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if not self.scale >= 0.0:
            raise ValueError(f"noise scale must be >= 0, got {self.scale}")
        if self.quantize is not None and not self.quantize > 0.0:
            raise ValueError(f"tick size must be > 0, got {self.quantize}")

    @classmethod
    def gaussian(cls, sigma: float, quantize: float | None = None) -> NoiseSpec:
        return cls(Distribution.GAUSSIAN, sigma, quantize)

    @classmethod
    def uniform(cls, half_width: float, quantize: float | None = None) -> NoiseSpec:
        return cls(Distribution.UNIFORM, half_width, quantize)

    @property
    def sigma(self) -> float:
        """Standard deviation of one timestamp error (quantization excluded)."""
        if self.distribution is Distribution.GAUSSIAN:
            return self.scale
        if self.distribution is Distribution.UNIFORM:
            return self.scale / math.sqrt(3.0)
        return 0.0

    def draw(self, rng: RandomStream, size=None):
        """Draw timestamp errors; ``size`` follows numpy conventions."""
        if self.distribution is Distribution.GAUSSIAN:
            return rng.normal(0.0, self.scale, size)
        if self.distribution is Distribution.UNIFORM:
            return rng.uniform(-self.scale, self.scale, size)
        return np.zeros(size) if size is not None else 0.0


NOISELESS = NoiseSpec()


def quantize(value, tick: float):
    """Round to the nearest multiple of ``tick``."""
    tick = Time(tick)
    return (np.round(as_time(value) / tick) * tick)[()]


@dataclass(frozen=True)
class ClockModel:
    """Clock reading ``offset + rate * t``; rate is dimensionless and near 1."""

    offset: float = 0.0
    rate: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    max_rate_deviation: float = 1e-3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.offset) and math.isfinite(self.rate)):
            raise ValueError("clock parameters must be finite")
        if self.rate <= 0.0:
            raise ValueError(f"clock rate must be positive, got {self.rate}")
        if abs(self.rate - 1.0) > self.max_rate_deviation:
            raise ValueError(
                f"clock rate {self.rate!r} deviates from 1 by more than {self.max_rate_deviation}"
            )

    def with_noise(self, noise: NoiseSpec) -> ClockModel:
        return ClockModel(self.offset, self.rate, noise, self.max_rate_deviation)

    def stamp(self, t, error=0.0):
        """Timestamp of ideal time ``t`` carrying a given noise draw ``error``.

        Quantization, when configured, is applied after the error.
        """
        value = read_ideal(self, t) + as_time(error)
        if self.noise.quantize is not None:
            value = quantize(value, self.noise.quantize)
        return value


def read_ideal(clock: ClockModel, t):
    return Time(clock.offset) + Time(clock.rate) * as_time(t)


def read_measured(clock: ClockModel, t, rng: RandomStream):
    """Noisy timestamp of ideal time ``t``; accepts scalars or arrays.

    Each element receives an independent error draw.
    """
    size = np.shape(t) if np.ndim(t) else None
    return clock.stamp(t, clock.noise.draw(rng, size))
