from __future__ import annotations

import math
import warnings

import pytest
from hypothesis import given, strategies as st

from uwb_dtdoa import uncertainty as u
from uwb_dtdoa.errors import NegativeVarianceWarning, ZeroIntervalError
from uwb_dtdoa.geometry import SPEED_OF_LIGHT as C
from uwb_dtdoa.uncertainty import (
    NoiseBudget,
    VarianceReport,
    corr_epsilon,
    report_csv,
    var_beta,
    var_epsilon,
    var_gamma,
    var_gamma_bar,
    var_lambda,
    var_phi,
    var_xi,
)

S = 9.035e-12


def budget(**kw) -> NoiseBudget:
    base = dict(sigma_ts_m=S, sigma_ts_i=S, sigma_ts=S, sync_gap=1.0, slot_offset=2e-3, pair_gap=7e-3,
                t_bar=5.0, t_m=12.0, tof_im=3e-8, master_offset=1e-4, master_rate=1 + 2e-6,
                anchor_rate=1 - 3e-6, tag_rate=1 + 1e-6)
    base.update(kw)
    return NoiseBudget(**base)


ALL = (var_beta, var_gamma, var_gamma_bar, var_epsilon, corr_epsilon, var_xi, var_phi, var_lambda)


@pytest.mark.parametrize("fn", ALL)
def test_zero_noise_collapse(fn):
    assert fn(budget().zero_noise()) == 0.0


def test_var_beta_unit_case():
    b = budget(master_rate=1.0, anchor_rate=1.0, sync_gap=1.0)
    assert var_beta(b) == pytest.approx(4 * S**2, rel=1e-15)


def test_var_beta_quarters_when_gap_doubles():
    assert var_beta(budget(sync_gap=2.0)) == pytest.approx(var_beta(budget(sync_gap=1.0)) / 4, rel=1e-14)


def test_var_gamma_at_epoch_zero():
    b = budget(t_bar=0.0, master_offset=0.0, master_rate=1.0, anchor_rate=1.0, sigma_ts_m=2 * S)
    assert var_gamma(b) == pytest.approx(S**2 + 4 * S**2, rel=1e-14)


def test_var_gamma_bar_at_centered_epoch():
    b = budget(t_bar=1.0, sync_gap=2.0, master_offset=-2.0, master_rate=1.0, sigma_ts_m=3 * S)
    assert var_gamma_bar(b) == pytest.approx((S**2 + 9 * S**2) / 2, rel=1e-14)


def test_var_gamma_delayed_uses_later_epoch():
    b = budget()
    assert var_gamma(b, at=b.t_bar + b.sync_gap) != var_gamma(b)


@given(st.floats(-100, 100), st.floats(1e-4, 10), st.floats(0, 3), st.floats(0, 3))
def test_var_gamma_never_negative(t_bar, gap, ki, km):
    # the anchor-noise weight 1 - 2r can be negative, but the r^2 term of sigma_beta always wins
    b = budget(t_bar=t_bar, sync_gap=gap, sigma_ts_i=ki * S, sigma_ts_m=km * S, master_offset=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NegativeVarianceWarning)
        assert var_gamma(b) >= 0.0


def test_negative_values_are_diagnosed_not_clipped():
    with pytest.warns(NegativeVarianceWarning):
        assert u._checked("x", -1.0) == -1.0


def test_corr_epsilon_at_zero_lag():
    # distinct stamps share everything except the anchor's own stamp noise;
    # a long sync gap makes the rate terms negligible
    b = budget(sync_gap=1e6, t_bar=0.0, t_m=1.0)
    nu2 = b.rel_rate**2
    lhs = corr_epsilon(b, lag=0.0) + b.sigma_ts_i**2 / nu2
    assert lhs == pytest.approx(var_epsilon(b), rel=1e-6)


def test_corr_epsilon_symmetric_in_order():
    b = budget()
    t = b.t_i
    assert corr_epsilon(b, t, 1e-3) == pytest.approx(corr_epsilon(b, t + 1e-3, -1e-3), rel=1e-12)


def test_var_xi_unit_case():
    b = budget(master_rate=1.0, anchor_rate=1.0, tag_rate=1.0, pair_gap=1.0, sync_gap=1e9)
    assert var_xi(b) == pytest.approx(4 * S**2, rel=1e-9)


@given(st.floats(1e-5, 1.0), st.floats(1.01, 10))
def test_beta_and_xi_decrease_with_interval(gap, factor):
    assert var_beta(budget(sync_gap=gap * factor)) < var_beta(budget(sync_gap=gap))
    assert var_xi(budget(pair_gap=gap * factor)) < var_xi(budget(pair_gap=gap))


def test_var_phi_collapse(monkeypatch):
    b = budget()
    monkeypatch.setattr(u, "var_xi", lambda _b: 0.0)
    monkeypatch.setattr(u, "corr_epsilon", lambda _b: var_epsilon(_b))
    assert var_phi(b) == pytest.approx(b.tag_rel_rate**2 * var_epsilon(b), rel=1e-14)


def test_var_phi_uses_extra_term_verbatim():
    b0, b1 = budget(), budget(sigma2_nu_m=1e-22)
    assert var_phi(b1) - var_phi(b0) == pytest.approx(b0.tag_rel_rate**2 * 1e-22, rel=1e-9)


def test_var_lambda_example(monkeypatch):
    b = budget(master_rate=1.0, anchor_rate=1.0, slot_offset=7e-3, pair_gap=7e-3)
    monkeypatch.setattr(u, "var_phi", lambda _b: 0.0)
    assert var_lambda(b) == pytest.approx(4 * C**2 * S**2, rel=1e-14)


@pytest.mark.parametrize("fn", [var_beta, var_gamma, var_gamma_bar])
def test_zero_sync_gap(fn):
    with pytest.raises(ZeroIntervalError):
        fn(budget(sync_gap=0.0))


@pytest.mark.parametrize("fn", [var_xi, var_phi, var_lambda])
def test_zero_pair_gap(fn):
    with pytest.raises(ZeroIntervalError):
        fn(budget(pair_gap=0.0))


def test_budget_validation():
    with pytest.raises(ValueError):
        budget(sigma_ts=-1.0)
    with pytest.raises(ValueError):
        budget(anchor_rate=0.0)


@given(
    st.floats(0.5, 2.0), st.floats(1e-4, 1e-2), st.floats(1e-4, 1e-2), st.floats(1e-4, 1e-2),
    st.floats(1, 10), st.floats(1, 10), st.floats(-10e-6, 10e-6), st.floats(-10e-6, 10e-6),
)
def test_operating_envelope_nonnegative(k, gap, slot, pair, t_bar, elapsed, dm, di):
    b = budget(sigma_ts_m=k * S, sync_gap=gap, slot_offset=slot, pair_gap=pair, t_bar=t_bar,
               t_m=t_bar + elapsed, master_rate=1 + dm, anchor_rate=1 + di)
    with warnings.catch_warnings():
        warnings.simplefilter("error", NegativeVarianceWarning)
        rep = VarianceReport.from_budget(b)
    for name in ("sigma2_beta", "sigma2_gamma", "sigma2_gamma_bar", "sigma2_epsilon", "sigma2_xi",
                 "sigma2_phi", "sigma2_lambda"):
        assert getattr(rep, name) >= 0.0


def test_report_csv_layout():
    reps = [VarianceReport.from_budget(budget()), VarianceReport.from_budget(budget(pair_gap=3e-3))]
    text = report_csv(reps, ["hdr"])
    lines = text.splitlines()
    assert lines[0] == "# hdr"
    assert lines[1].startswith("# units: sigma2_beta=1")
    assert lines[2].split(",")[0] == "anchor"
    assert [ln.split(",")[0] for ln in lines[3:]] == ["1", "2"]
    assert float(lines[3].split(",")[-1]) == pytest.approx(reps[0].sigma2_lambda, rel=1e-15)
    assert math.isfinite(float(lines[4].split(",")[1]))
