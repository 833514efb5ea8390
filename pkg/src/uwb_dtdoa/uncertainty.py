"""First-order variance propagation for the sync and DTDoA estimators.

Every function takes a :class:`NoiseBudget` describing one anchor/master/tag
triple and returns the closed-form variance of one intermediate error:

* rate error of the anchor sync (``var_beta``)
* offset error from the first pair, and from the averaged pairs
  (``var_gamma``, ``var_gamma_bar``)
* error of mapping an anchor stamp onto the master timescale, and the
  covariance of two such mappings (``var_epsilon``, ``corr_epsilon``)
* error of the tag rate (``var_xi``)
* error of the protocol interval and of the final range difference
  (``var_phi``, ``var_lambda``)

The first-order forms are evaluated as stated, with the rough edges noted
on the individual functions; nothing is clipped.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import asdict, dataclass, fields
from typing import Sequence

from .errors import NegativeVarianceWarning, ZeroIntervalError
from .geometry import SPEED_OF_LIGHT


def _positive(name: str, value: float) -> float:
    if not value > 0.0:
        raise ZeroIntervalError(f"{name} must be positive, got {value}")
    return value


def _checked(name: str, value: float) -> float:
    if value < 0.0:
        warnings.warn(f"{name} evaluated negative ({value:.3e})", NegativeVarianceWarning, stacklevel=3)
    return value


@dataclass(frozen=True)
class NoiseBudget:
    """Everything the closed forms need for one anchor.

    Times are ideal seconds. ``sync_gap`` is the spacing of the two sync
    messages, ``slot_offset`` the delay of the anchor's first broadcast after
    the master's, ``pair_gap`` the spacing of the anchor's two broadcasts.
    ``sigma2_nu_m`` is the extra variance term of the protocol interval that
    has no further definition; it defaults to zero.
    """

    sigma_ts_m: float
    sigma_ts_i: float
    sigma_ts: float
    sync_gap: float
    slot_offset: float
    pair_gap: float
    t_bar: float = 0.0
    t_m: float = 0.0
    tof_im: float = 0.0
    master_offset: float = 0.0
    master_rate: float = 1.0
    anchor_rate: float = 1.0
    tag_rate: float = 1.0
    c: float = SPEED_OF_LIGHT
    sigma2_nu_m: float = 0.0

    def __post_init__(self) -> None:
        for name in ("sigma_ts_m", "sigma_ts_i", "sigma_ts", "sigma2_nu_m"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("master_rate", "anchor_rate", "tag_rate"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def rel_rate(self) -> float:
        """Anchor rate relative to the master."""
        return self.anchor_rate / self.master_rate

    @property
    def tag_rel_rate(self) -> float:
        """Tag rate relative to the master (static tag)."""
        return self.tag_rate / self.master_rate

    @property
    def residual(self) -> float:
        return (1.0 - self.anchor_rate) / self.rel_rate * self.tof_im

    @property
    def t_i(self) -> float:
        return self.t_m + self.slot_offset

    def tau_m(self, t: float) -> float:
        """Noiseless master clock reading at ideal time ``t``."""
        return self.master_offset + self.master_rate * t

    def zero_noise(self) -> NoiseBudget:
        values = asdict(self)
        values.update(sigma_ts_m=0.0, sigma_ts_i=0.0, sigma_ts=0.0, sigma2_nu_m=0.0)
        return NoiseBudget(**values)


def var_beta(b: NoiseBudget) -> float:
    gap = _positive("sync_gap", b.sync_gap)
    return 2.0 / (b.master_rate**2 * gap**2) * (b.sigma_ts_i**2 + b.rel_rate**2 * b.sigma_ts_m**2)


def var_gamma(b: NoiseBudget, at: float | None = None) -> float:
    """Offset error from a single message pair.

    ``at`` is the ideal send time of the pair used (default: the sync
    epoch); pass ``t_bar + sync_gap`` for the delayed pair. The first-order
    form weights the anchor-noise term by ``1 - 2 tau/(rate_m gap)``.
    """
    gap = _positive("sync_gap", b.sync_gap)
    tau = b.tau_m(b.t_bar if at is None else at)
    ratio = 2.0 * tau / (b.master_rate * gap)
    value = (
        (1.0 - ratio) * b.sigma_ts_i**2
        + b.rel_rate**2 * (1.0 + ratio) * b.sigma_ts_m**2
        + tau**2 * var_beta(b)
    )
    return _checked("var_gamma", value)


def var_gamma_bar(b: NoiseBudget) -> float:
    gap = _positive("sync_gap", b.sync_gap)
    mid = b.tau_m(b.t_bar + gap / 2.0)
    return b.sigma_ts_i**2 / 2.0 + b.sigma_ts_m**2 / 2.0 + mid**2 * var_beta(b)


def var_epsilon(b: NoiseBudget, t: float | None = None) -> float:
    """Error of mapping an anchor stamp taken at ``t`` (default ``t_i``) to the master timescale."""
    t = b.t_i if t is None else t
    nu2 = b.rel_rate**2
    shifted = b.tau_m(t) + b.residual
    value = (
        b.sigma_ts_i**2 / nu2
        + var_gamma_bar(b) / nu2
        + (shifted**2 / nu2 - 2.0 * shifted / nu2 * b.tau_m(b.t_bar)) * var_beta(b)
    )
    return _checked("var_epsilon", value)


def corr_epsilon(b: NoiseBudget, t: float | None = None, lag: float | None = None) -> float:
    """Covariance of the mapping errors at ``t`` and ``t + lag``.

    Defaults are the anchor's two broadcast times. The first term is
    the product ``(tau(t) + e)(tau(t + lag) + e)``. The two stamps carry
    independent timestamp noise, so at zero lag this is the variance minus
    the anchor's own ``sigma_ts_i^2 / rel_rate^2``.
    """
    t = b.t_i if t is None else t
    lag = b.pair_gap if lag is None else lag
    nu2 = b.rel_rate**2
    e = b.residual
    first, second = b.tau_m(t), b.tau_m(t + lag)
    mid = b.tau_m(b.t_bar + b.sync_gap / 2.0)
    return (
        (first + e) * (second + e) / nu2 * var_beta(b)
        + var_gamma_bar(b) / nu2
        - (first + second + 2.0 * e) / nu2 * mid * var_beta(b)
    )


def var_xi(b: NoiseBudget, pair_gap: float | None = None) -> float:
    """Tag rate error when syntonizing on the anchor's message pair."""
    gap = _positive("pair_gap", b.pair_gap if pair_gap is None else pair_gap)
    return (
        2.0 * b.tag_rel_rate**2 / (b.anchor_rate**2 * gap**2) * b.sigma_ts_i**2
        + 2.0 / (b.master_rate**2 * gap**2) * b.sigma_ts**2
        + b.tag_rel_rate**2 / b.rel_rate**2 * var_beta(b)
    )


def _protocol_span(b: NoiseBudget) -> float:
    return b.master_rate * b.slot_offset + b.residual


def var_phi(b: NoiseBudget) -> float:
    """Protocol-interval error.

    The first term carries ``sigma2_nu_m`` from the budget verbatim.
    """
    gap = _positive("pair_gap", b.pair_gap)
    nu_m2 = b.tag_rel_rate**2
    eps = var_epsilon(b)
    span = _protocol_span(b)
    value = (
        nu_m2 * (eps + b.sigma2_nu_m)
        + 2.0 * nu_m2 / (b.master_rate * gap) * span * (eps - corr_epsilon(b))
        + span**2 * var_xi(b)
    )
    return _checked("var_phi", value)


def var_lambda(b: NoiseBudget) -> float:
    """Variance of the final range difference, in square meters."""
    gap = _positive("pair_gap", b.pair_gap)
    value = b.c**2 * (2.0 * (1.0 + _protocol_span(b) / (b.master_rate * gap)) * b.sigma_ts**2 + var_phi(b))
    return _checked("var_lambda", value)


@dataclass(frozen=True)
class VarianceReport:
    sigma2_beta: float
    sigma2_gamma: float
    sigma2_gamma_bar: float
    sigma2_epsilon: float
    corr_epsilon: float
    sigma2_xi: float
    sigma2_phi: float
    sigma2_lambda: float

    @classmethod
    def from_budget(cls, b: NoiseBudget) -> VarianceReport:
        return cls(
            sigma2_beta=var_beta(b),
            sigma2_gamma=var_gamma(b),
            sigma2_gamma_bar=var_gamma_bar(b),
            sigma2_epsilon=var_epsilon(b),
            corr_epsilon=corr_epsilon(b),
            sigma2_xi=var_xi(b),
            sigma2_phi=var_phi(b),
            sigma2_lambda=var_lambda(b),
        )


REPORT_UNITS = {
    "sigma2_beta": "1",
    "sigma2_gamma": "s^2",
    "sigma2_gamma_bar": "s^2",
    "sigma2_epsilon": "s^2",
    "corr_epsilon": "s^2",
    "sigma2_xi": "1",
    "sigma2_phi": "s^2",
    "sigma2_lambda": "m^2",
}


def report_csv(reports: Sequence[VarianceReport], header: Sequence[str] = ()) -> str:
    """One row per anchor (1-based), one column per variance."""
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    buf.write("# units: " + ", ".join(f"{k}={v}" for k, v in REPORT_UNITS.items()) + "\n")
    names = [f.name for f in fields(VarianceReport)]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["anchor", *names])
    for k, rep in enumerate(reports, start=1):
        writer.writerow([k, *(f"{getattr(rep, n):.16e}" for n in names)])
    return buf.getvalue()
