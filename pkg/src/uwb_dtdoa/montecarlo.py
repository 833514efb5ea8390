"""Monte Carlo check of the closed-form variances.

Each anchor gets one random configuration (clocks, positions, protocol
intervals, epochs). Every trial then redraws only the timestamping noise,
runs the sync and DTDoA estimators on noisy stamps, and subtracts their
noiseless output. The spread of those errors is compared with the
closed forms of :mod:`uwb_dtdoa.uncertainty`.

Trial ``k`` of anchor ``i`` draws from substream ``(seed, i + 1, k)`` and
the configuration of anchor ``i`` from ``(seed, 0, i)``, so any slice of
trials can be reproduced on its own.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .clocks import TICK_S, ClockModel, NoiseSpec, Time
from .dtdoa import dtdoa_value
from .errors import DegenerateDrawError
from .geometry import SPEED_OF_LIGHT, distance
from .rng import stream
from .sync import (
    SyncObservation,
    SyncState,
    average_rel_offset,
    estimate_rel_offset,
    estimate_rel_rate,
    estimate_tag_rate,
    to_master_timescale,
)
from .uncertainty import (
    NoiseBudget,
    corr_epsilon,
    var_epsilon,
    var_gamma,
    var_gamma_bar,
    var_lambda,
    var_phi,
    var_xi,
)
from . import plotting


class Target(str, Enum):
    GAMMA = "gamma"
    GAMMA_DELAYED = "gamma_delayed"
    GAMMA_BAR = "gamma_bar"
    EPSILON = "epsilon"
    EPSILON_CORR = "epsilon_corr"
    XI = "xi"
    PHI = "phi"
    LAMBDA = "lambda"


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings.

    ``half_width`` bounds the timestamp error. Uniform noise spans
    ``+-half_width``; Gaussian noise uses ``sigma = half_width / 3`` so that
    99.7 % of draws fall inside the same bound, unless ``gaussian_sigma``
    is given.

    The epochs are drawn in seconds after power-up: the sync exchange at
    ``t_bar``, the master's broadcast ``elapsed`` seconds later.
    """

    trials: int = 10_000
    anchors: int = 10
    seed: int = 0
    noise: str = "gaussian"
    half_width: float = TICK_S
    gaussian_sigma: float | None = None
    offset_range: float = 1e-3
    rate_ppm: float = 10.0
    box: float = 20.0
    interval_range: tuple[float, float] = (1e-4, 1e-2)
    t_bar_range: tuple[float, float] = (1.0, 10.0)
    elapsed_range: tuple[float, float] = (1.0, 10.0)
    sigma2_nu_m: float = 0.0
    c: float = SPEED_OF_LIGHT

    def __post_init__(self) -> None:
        if self.trials < 100:
            raise ValueError("at least 100 trials are required")
        if self.anchors < 1:
            raise ValueError("at least one anchor is required")
        if self.noise not in ("gaussian", "uniform", "none"):
            raise ValueError(f"unknown noise family {self.noise!r}")
        if self.half_width < 0:
            raise ValueError("half_width must be >= 0")
        lo, hi = self.interval_range
        if not 0 < lo <= hi:
            raise ValueError("interval range must be positive")

    def noise_spec(self) -> NoiseSpec:
        if self.noise == "gaussian":
            sigma = self.half_width / 3.0 if self.gaussian_sigma is None else self.gaussian_sigma
            return NoiseSpec.gaussian(sigma)
        if self.noise == "uniform":
            return NoiseSpec.uniform(self.half_width)
        return NoiseSpec()

    def header(self) -> list[str]:
        items = asdict(self)
        return [f"uwb_dtdoa {__version__} montecarlo", *(f"{k}={v}" for k, v in items.items())]


@dataclass(frozen=True)
class AnchorSetup:
    """Random configuration of one anchor run (static tag)."""

    master: ClockModel
    anchor: ClockModel
    tag: ClockModel
    master_pos: np.ndarray
    anchor_pos: np.ndarray
    tag_pos: np.ndarray
    sync_gap: float
    slot_offset: float
    pair_gap: float
    master_pair_gap: float
    t_bar: float
    t_m: float
    c: float

    @property
    def tof_im(self) -> float:
        return distance(self.master_pos, self.anchor_pos) / self.c

    def budget(self, noise: NoiseSpec, sigma2_nu_m: float = 0.0) -> NoiseBudget:
        s = noise.sigma
        return NoiseBudget(
            sigma_ts_m=s,
            sigma_ts_i=s,
            sigma_ts=s,
            sync_gap=self.sync_gap,
            slot_offset=self.slot_offset,
            pair_gap=self.pair_gap,
            t_bar=self.t_bar,
            t_m=self.t_m,
            tof_im=self.tof_im,
            master_offset=self.master.offset,
            master_rate=self.master.rate,
            anchor_rate=self.anchor.rate,
            tag_rate=self.tag.rate,
            c=self.c,
            sigma2_nu_m=sigma2_nu_m,
        )


def _draw_setup(cfg: McConfig, rng: np.random.Generator) -> AnchorSetup:
    def clock() -> ClockModel:
        return ClockModel(
            rng.uniform(-cfg.offset_range, cfg.offset_range),
            1.0 + rng.uniform(-cfg.rate_ppm, cfg.rate_ppm) * 1e-6,
        )

    lo, hi = cfg.interval_range
    master, anchor, tag = clock(), clock(), clock()
    pos = rng.uniform(0.0, cfg.box, (3, 2))
    sync_gap, slot_offset, pair_gap, master_pair_gap = rng.uniform(lo, hi, 4)
    t_bar = rng.uniform(*cfg.t_bar_range)
    t_m = t_bar + rng.uniform(*cfg.elapsed_range)
    return AnchorSetup(
        master, anchor, tag, pos[0], pos[1], pos[2],
        sync_gap, slot_offset, pair_gap, master_pair_gap, t_bar, t_m, cfg.c,
    )


def _valid(setup: AnchorSetup) -> bool:
    pts = (setup.master_pos, setup.anchor_pos, setup.tag_pos)
    return min(distance(p, q) for i, p in enumerate(pts) for q in pts[i + 1 :]) >= 1e-3


MAX_REDRAWS = 1000


def draw_setups(cfg: McConfig) -> tuple[list[AnchorSetup], int]:
    """One configuration per anchor and the number of rejected draws."""
    setups, rejected = [], 0
    for i in range(cfg.anchors):
        rng = stream(cfg.seed, 0, i)
        for _ in range(MAX_REDRAWS):
            setup = _draw_setup(cfg, rng)
            if _valid(setup):
                break
            rejected += 1
        else:
            raise DegenerateDrawError(f"anchor {i + 1}: no valid configuration in {MAX_REDRAWS} draws")
        setups.append(setup)
    return setups, rejected


N_DRAWS = 12


def draw_noise(cfg: McConfig, anchor_index: int, trials: range | None = None) -> np.ndarray:
    """Timestamp errors of shape (trials, 12); all nodes share the configured noise.

    Columns: master sync tx (2), anchor sync rx (2), master broadcast tx
    (2), anchor broadcast tx (2), tag rx of master frames (2), tag rx of
    anchor frames (2).
    """
    trials = range(cfg.trials) if trials is None else trials
    spec = cfg.noise_spec()
    out = np.empty((len(trials), N_DRAWS))
    for row, k in enumerate(trials):
        out[row] = spec.draw(stream(cfg.seed, anchor_index + 1, k), N_DRAWS)
    return out


def estimator_values(setup: AnchorSetup, noise: np.ndarray | None) -> dict[Target, np.ndarray]:
    """Output of every estimator for each noise row (``None``: noiseless)."""
    z = np.zeros((1, N_DRAWS)) if noise is None else noise
    T = lambda x: np.asarray(x, dtype=Time)  # noqa: E731
    m, a, tag = setup.master, setup.anchor, setup.tag
    tof_im = setup.tof_im
    tof_m = distance(setup.tag_pos, setup.master_pos) / setup.c
    tof_a = distance(setup.tag_pos, setup.anchor_pos) / setup.c

    t_bar = T(setup.t_bar)
    obs = SyncObservation(
        m.stamp(t_bar, z[:, 0]),
        m.stamp(t_bar + T(setup.sync_gap), z[:, 1]),
        a.stamp(t_bar + T(tof_im), z[:, 2]),
        a.stamp(t_bar + T(setup.sync_gap) + T(tof_im), z[:, 3]),
        tof_im,
    )
    rate = estimate_rel_rate(obs)
    off1 = estimate_rel_offset(obs, rate)
    off2 = estimate_rel_offset(obs, rate, delayed=True)
    state = SyncState(rate, average_rel_offset(off1, off2))

    t_m = T(setup.t_m)
    t_i = t_m + T(setup.slot_offset)
    t_i2 = t_i + T(setup.pair_gap)
    master_tx = m.stamp(t_m, z[:, 4])
    conv1 = to_master_timescale(a.stamp(t_i, z[:, 6]), state)
    conv2 = to_master_timescale(a.stamp(t_i2, z[:, 7]), state)
    rx_m = tag.stamp(t_m + T(tof_m), z[:, 8])
    rx_a1 = tag.stamp(t_i + T(tof_a), z[:, 10])
    rx_a2 = tag.stamp(t_i2 + T(tof_a), z[:, 11])

    tag_rate = estimate_tag_rate(rx_a1, rx_a2, conv1, conv2)
    g = tag_rate * (conv1 - master_tx)
    value = dtdoa_value(rx_a1, rx_m, g, setup.c)
    return {
        Target.GAMMA: off1,
        Target.GAMMA_DELAYED: off2,
        Target.GAMMA_BAR: state.rel_offset,
        Target.EPSILON: conv1,
        Target.EPSILON_CORR: conv2,
        Target.XI: tag_rate,
        Target.PHI: g,
        Target.LAMBDA: value,
    }


def anchor_errors(setup: AnchorSetup, noise: np.ndarray) -> dict[Target, np.ndarray]:
    noisy = estimator_values(setup, noise)
    clean = estimator_values(setup, None)
    return {k: np.asarray(noisy[k] - clean[k], dtype=float) for k in Target}


def analytic_variance(setup: AnchorSetup, cfg: McConfig, target: Target) -> float:
    b = setup.budget(cfg.noise_spec(), cfg.sigma2_nu_m)
    if target is Target.GAMMA:
        return var_gamma(b)
    if target is Target.GAMMA_DELAYED:
        return var_gamma(b, at=b.t_bar + b.sync_gap)
    if target is Target.GAMMA_BAR:
        return var_gamma_bar(b)
    if target is Target.EPSILON:
        return var_epsilon(b)
    if target is Target.EPSILON_CORR:
        return corr_epsilon(b)
    if target is Target.XI:
        return var_xi(b)
    if target is Target.PHI:
        return var_phi(b)
    return var_lambda(b)


def _signed_sqrt(x: float) -> float:
    return math.copysign(math.sqrt(abs(x)), x)


def _rel_pct(theory: float, mc: float) -> float:
    if mc == 0.0:
        return 0.0 if theory == 0.0 else math.inf
    return 100.0 * abs(theory - mc) / abs(mc)


@dataclass(frozen=True)
class McResult:
    """Per-anchor comparison for one target.

    For the covariance target ``empirical_std``/``analytic_std`` are signed
    square roots of the covariances and ``empirical_mean`` is the mean of
    the later mapping error. ``rel_err_mean_pct`` is the mean error in
    percent of the empirical spread (the analytic mean is zero).
    """

    anchor: int
    target: Target
    trials: int
    empirical_mean: float
    empirical_std: float
    analytic_std: float
    rel_err_mean_pct: float
    rel_err_std_pct: float

    @property
    def standard_error(self) -> float:
        return abs(self.empirical_std) / math.sqrt(self.trials)


def summarize(anchor: int, target: Target, errors: Mapping[Target, np.ndarray], analytic_var: float) -> McResult:
    if target is Target.EPSILON_CORR:
        first, second = errors[Target.EPSILON], errors[Target.EPSILON_CORR]
        n = len(first)
        cov = float(np.sum((first - first.mean()) * (second - second.mean())) / (n - 1))
        mean = float(second.mean())
        emp, ana = _signed_sqrt(cov), _signed_sqrt(analytic_var)
    else:
        sample = errors[target]
        n = len(sample)
        mean = float(sample.mean())
        emp = float(sample.std(ddof=1))
        ana = _signed_sqrt(analytic_var)
    mean_pct = 0.0 if emp == 0.0 else 100.0 * abs(mean) / abs(emp)
    return McResult(anchor, target, n, mean, emp, ana, mean_pct, _rel_pct(ana, emp))


@dataclass
class McRun:
    """Errors of all targets for every anchor, plus the setups that produced them."""

    config: McConfig
    setups: list[AnchorSetup]
    errors: list[dict[Target, np.ndarray]]
    redraws: int = 0

    def results(self, target: Target | str) -> list[McResult]:
        target = Target(target)
        return [
            summarize(i + 1, target, err, analytic_variance(setup, self.config, target))
            for i, (setup, err) in enumerate(zip(self.setups, self.errors))
        ]


def simulate(cfg: McConfig, trials: range | None = None) -> McRun:
    setups, redraws = draw_setups(cfg)
    errors = [anchor_errors(s, draw_noise(cfg, i, trials)) for i, s in enumerate(setups)]
    return McRun(cfg, setups, errors, redraws)


def run_mc(cfg: McConfig, target: Target | str) -> list[McResult]:
    return simulate(cfg).results(target)


RESULT_COLUMNS = (
    "anchor", "target", "trials", "empirical_mean", "empirical_std",
    "analytic_std", "rel_err_mean_pct", "rel_err_std_pct",
)


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def results_csv(results: Sequence[McResult], header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in results:
        w.writerow([
            r.anchor, r.target.value, r.trials, _fmt(r.empirical_mean), _fmt(r.empirical_std),
            _fmt(r.analytic_std), _fmt(r.rel_err_mean_pct), _fmt(r.rel_err_std_pct),
        ])
    return buf.getvalue()


FIG2_TARGETS = (Target.GAMMA, Target.GAMMA_DELAYED, Target.GAMMA_BAR)


def fig2_table(results: Mapping[Target, Sequence[McResult]]) -> tuple[list[str], list[list]]:
    columns = ["anchor"]
    for t in FIG2_TARGETS:
        columns += [f"{t.value}_mu_pct", f"{t.value}_sigma_pct"]
    n = min((len(results.get(t, ())) for t in FIG2_TARGETS), default=0)
    rows = []
    for k in range(n):
        row: list = [results[FIG2_TARGETS[0]][k].anchor]
        for t in FIG2_TARGETS:
            r = results[t][k]
            row += [r.rel_err_mean_pct, r.rel_err_std_pct]
        rows.append(row)
    return columns, rows


def emit_fig2(results: Mapping[Target, Sequence[McResult]], header: Sequence[str] = ()) -> tuple[str, str]:
    """Relative-error table (CSV) and grouped bar chart (SVG) per anchor."""
    columns, rows = fig2_table(results)
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([row[0], *(_fmt(v) for v in row[1:])])
    series = {name: [row[j] for row in rows] for j, name in enumerate(columns[1:], start=1)}
    svg = plotting.bar_chart(
        [str(row[0]) for row in rows], series,
        title="Absolute relative error vs Monte Carlo", xlabel="anchor", ylabel="error [%]",
    )
    return buf.getvalue(), svg


def lambda_samples(run: McRun, anchor: int = 1) -> np.ndarray:
    return run.errors[anchor - 1][Target.LAMBDA]


def emit_fig3(
    run_gaussian: McRun, run_uniform: McRun, anchor: int = 1, bins: int = 41, header: Sequence[str] = ()
) -> tuple[str, str]:
    """Histograms of the range-difference error under both noise families."""
    samples = {"gaussian": lambda_samples(run_gaussian, anchor), "uniform": lambda_samples(run_uniform, anchor)}
    stds = {
        "gaussian": math.sqrt(analytic_variance(run_gaussian.setups[anchor - 1], run_gaussian.config, Target.LAMBDA)),
        "uniform": math.sqrt(analytic_variance(run_uniform.setups[anchor - 1], run_uniform.config, Target.LAMBDA)),
    }
    lo = min(float(s.min()) for s in samples.values())
    hi = max(float(s.max()) for s in samples.values())
    if hi == lo:
        edges = np.array([lo, hi])
    else:
        edges = np.linspace(lo, hi, bins + 1)
    counts = {k: np.histogram(v, bins=edges)[0] if hi > lo else np.array([len(v)]) for k, v in samples.items()}

    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    for k in samples:
        buf.write(f"# {k}: sample_std_m={_fmt(float(samples[k].std(ddof=1)))} analytic_std_m={_fmt(stds[k])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_left_m", "bin_right_m", "count_gaussian", "count_uniform"])
    for j in range(len(edges) - 1):
        w.writerow([_fmt(edges[j]), _fmt(edges[j + 1]), int(counts["gaussian"][j]), int(counts["uniform"][j])])
    svg = plotting.histograms(
        edges, {k: list(map(int, v)) for k, v in counts.items()},
        title=f"Range-difference error, anchor {anchor}", xlabel="error [m]",
    )
    return buf.getvalue(), svg


def with_noise(cfg: McConfig, noise: str) -> McConfig:
    return replace(cfg, noise=noise)
