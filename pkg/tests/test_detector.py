import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blindqkd.detector import (
    ClickCause,
    ClickOutcome,
    ClickThresholds,
    DetectorElectrical,
    DetectorError,
    DetectorMode,
    GateSchedule,
    GeigerParams,
    Incident,
    ThermalParams,
    bias_at_t1,
    calibrate_responsivity,
    detect_frame,
    geiger_click,
    geiger_click_probability,
    is_blinded,
    linear_click,
    linear_click_probability,
    thermal_blind_shift,
    thermal_resistance_for_onset,
)
from blindqkd.rng import RandomStreams

from conftest import NoRandom, binomial_ok

CLAVIS_DET0 = DetectorElectrical(r_bias=1000.0, responsivity=2.5 / (397e-6 * 1e3))
TH_DET0 = ClickThresholds(p_never=647e-6, p_always=808e-6, p_blind=397e-6)


def test_defaults_put_dc_bias_half_a_volt_below_breakdown():
    e = DetectorElectrical()
    assert e.v_hv == 50.0 and e.v_br == 50.5
    assert e.excess_bias == pytest.approx(2.5)


@pytest.mark.parametrize("kwargs", [dict(r_bias=-1.0), dict(dc_margin=3.0), dict(responsivity=0.0)])
def test_electrical_invariants(kwargs):
    with pytest.raises(DetectorError):
        DetectorElectrical(**kwargs)


def test_threshold_and_schedule_invariants():
    with pytest.raises(DetectorError):
        ClickThresholds(p_never=808e-6, p_always=647e-6, p_blind=1e-4)
    with pytest.raises(DetectorError):
        GateSchedule(period=2.0, gate_width=2.5)
    with pytest.raises(DetectorError):
        GeigerParams(efficiency=1.5)
    with pytest.raises(DetectorError):
        ClickOutcome(True, ClickCause.NONE)


@pytest.mark.parametrize(
    "p_blind, r_bias, expected",
    [(397e-6, 1e3, 6.297), (765e-6, 1e3, 3.268), (60e-6, 20e3, 2.083)],
)
def test_calibrate_responsivity(p_blind, r_bias, expected):
    # oracle: 2.5 V / (p_blind * r_bias), evaluated by hand to 4 significant figures
    r = calibrate_responsivity(p_blind, DetectorElectrical(r_bias=r_bias))
    assert r == pytest.approx(expected, abs=5e-4)


def test_bias_at_t1_examples():
    assert bias_at_t1(0.0, CLAVIS_DET0) == 50.0
    assert 50.0 - bias_at_t1(397e-6, CLAVIS_DET0) == pytest.approx(2.5, rel=1e-12)
    assert 50.0 - bias_at_t1(2 * 397e-6, CLAVIS_DET0) == pytest.approx(5.0, rel=1e-12)
    # rounded responsivity from the table gives the same droop to 1e-4
    approx = DetectorElectrical(r_bias=1000.0, responsivity=6.297)
    assert 50.0 - bias_at_t1(397e-6, approx) == pytest.approx(2.5, rel=1e-4)


def test_bias_floors_at_zero():
    assert bias_at_t1(1.0, CLAVIS_DET0) == 0.0


@given(st.floats(0, 0.01), st.floats(0, 0.01))
def test_bias_monotone(a, b):
    lo, hi = sorted((a, b))
    assert bias_at_t1(hi, CLAVIS_DET0) <= bias_at_t1(lo, CLAVIS_DET0)
    # strict below the floor, once the droop exceeds float resolution at 50 V
    if hi - lo > 1e-12 and bias_at_t1(hi, CLAVIS_DET0) > 0:
        assert bias_at_t1(hi, CLAVIS_DET0) < bias_at_t1(lo, CLAVIS_DET0)


def test_is_blinded_examples(presets):
    assert is_blinded(1.08e-3, CLAVIS_DET0)
    assert not is_blinded(0.0, CLAVIS_DET0)
    qpn1 = presets.detector("qpn5505-det1").electrical
    assert not is_blinded(84e-6, qpn1)
    assert is_blinded(86e-6, qpn1)


@pytest.mark.parametrize("name", ["clavis2-det0", "clavis2-det1", "qpn5505-det0", "qpn5505-det1"])
def test_sharp_blinding_threshold(presets, name):
    d = presets.detector(name)
    p_blind = d.thresholds.p_blind
    for p in np.linspace(0, p_blind, 200, endpoint=False):
        assert not is_blinded(p, d.electrical)
    for p in np.linspace(p_blind, 10 * p_blind, 200):
        assert is_blinded(p, d.electrical)


def test_geiger_limits():
    g = GeigerParams(efficiency=0.3, dark_count_prob=0.0)
    rng = np.random.default_rng(1)
    assert all(not geiger_click(0.0, g, rng).clicked for _ in range(10_000))
    assert all(geiger_click(math.inf, g, rng) == ClickOutcome(True, ClickCause.PHOTON) for _ in range(1000))


def test_geiger_rate_closed_form():
    g = GeigerParams(efficiency=0.1, dark_count_prob=0.0)
    stream = RandomStreams(5).stream("geiger")
    n = 1_000_000
    clicks = sum(geiger_click(0.1, g, stream).clicked for _ in range(n))
    p = 1 - math.exp(-0.01)
    assert geiger_click_probability(0.1, g) == pytest.approx(p, rel=1e-12)
    assert p == pytest.approx(0.00995, abs=5e-6)
    assert binomial_ok(clicks, n, p)


def test_geiger_cause_split():
    g = GeigerParams(efficiency=0.5, dark_count_prob=0.2)
    rng = np.random.default_rng(3)
    n = 200_000
    causes = [geiger_click(1.0, g, rng).cause for _ in range(n)]
    p_photon = 1 - math.exp(-0.5)
    assert binomial_ok(causes.count(ClickCause.PHOTON), n, p_photon)
    assert binomial_ok(causes.count(ClickCause.DARK), n, (1 - p_photon) * 0.2)


def test_linear_click_endpoints_and_ramp():
    rng = np.random.default_rng(9)
    assert sum(linear_click(647e-6, TH_DET0, rng).clicked for _ in range(100_000)) == 0
    assert sum(linear_click(808e-6, TH_DET0, rng).clicked for _ in range(100_000)) == 100_000
    mid = 0.5 * (647e-6 + 808e-6)
    assert linear_click_probability(mid, TH_DET0) == pytest.approx(0.5)
    clicks = sum(linear_click(mid, TH_DET0, rng).clicked for _ in range(100_000))
    assert binomial_ok(clicks, 100_000, 0.5)
    out = linear_click(900e-6, TH_DET0, NoRandom())
    assert out.cause is ClickCause.LINEAR_THRESHOLD


@given(st.floats(0, 2e-3), st.floats(0, 2e-3))
def test_linear_click_monotone(a, b):
    lo, hi = sorted((a, b))
    assert linear_click_probability(lo, TH_DET0) <= linear_click_probability(hi, TH_DET0)


def test_detector_modes(presets):
    d = presets.detector("clavis2-det0")
    assert d.expose(0.0) is DetectorMode.GEIGER and d.bias == 50.0
    assert d.expose(1.08e-3) is DetectorMode.LINEAR and d.blinded
    assert d.bias == pytest.approx(50.0 - 2.5 * 1.08e-3 / 397e-6)


def test_blinded_detector_has_no_dark_counts(presets):
    d = presets.detector("clavis2-det1")
    rng = np.random.default_rng(0)
    assert not any(d.respond(Incident(cw_power=1.08e-3), rng).clicked for _ in range(100_000))


def test_partially_illuminated_live_detector_clicks_on_cw(presets):
    # Below p_blind the gate still reaches Geiger mode and the CW photons fire it.
    d = presets.detector("clavis2-det0")
    out = d.respond(Incident(cw_power=100e-6), np.random.default_rng(0))
    assert out.cause is ClickCause.PHOTON


def test_detect_frame_matched_and_mismatched(presets):
    dets = [presets.detector("clavis2-det0"), presets.detector("clavis2-det1")]
    P = 1.113e-3
    clicks = detect_frame([Incident(1.08e-3, P), Incident(1.08e-3, 0.0)], dets, NoRandom())
    assert [c.clicked for c in clicks] == [True, False]
    clicks = detect_frame([Incident(1.08e-3, P / 2), Incident(1.08e-3, P / 2)], dets, NoRandom())
    assert [c.clicked for c in clicks] == [False, False]
    live = [presets.detector("clavis2-det0"), presets.detector("clavis2-det1")]
    for d in live:
        d.geiger = GeigerParams(0.1, 0.0)
    assert not any(c.clicked for c in detect_frame([Incident(), Incident()], live, np.random.default_rng(0)))


def test_threshold_table_interpolates(presets):
    d = presets.detector("qpn5505-det0")
    assert d.thresholds_at(200e-6).p_always == pytest.approx(35e-6)
    assert d.thresholds_at(275e-6).p_always == pytest.approx(54e-6)
    assert d.thresholds_at(50e-6).p_always == pytest.approx(31e-6)


# Thermal sub-model


def _shorted():
    return CLAVIS_DET0.shorted()


def test_thermal_disabled_is_an_error():
    with pytest.raises(DetectorError):
        thermal_blind_shift(1e-3, None, CLAVIS_DET0)
    with pytest.raises(DetectorError):
        thermal_blind_shift(1e-3, ThermalParams(enabled=False), CLAVIS_DET0)


def test_thermal_zero_power_zero_shift():
    assert thermal_blind_shift(0.0, ThermalParams(), _shorted()) == 0.0


def test_thermal_onset_at_seven_milliwatts():
    elec = _shorted()
    r_th = thermal_resistance_for_onset(7e-3, elec)
    thermal = ThermalParams(0.1, r_th)
    assert not is_blinded(7e-3, elec)
    assert is_blinded(7e-3, elec, thermal)
    assert not is_blinded(6.99e-3, elec, thermal)
    assert thermal_blind_shift(7e-3, thermal, elec) == pytest.approx(2.5)


def _onset(elec, thermal):
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if is_blinded(mid, elec, thermal) else (mid, hi)
    return hi


def test_doubling_thermal_resistance_halves_onset():
    # oracle: onset = excess / (dvbr * R_th * responsivity * v_hv), linear in 1/R_th
    elec = _shorted()
    t1 = ThermalParams(0.1, 10.0)
    t2 = ThermalParams(0.1, 20.0)
    expected = 2.5 / (0.1 * 10.0 * elec.responsivity * 50.0)
    assert _onset(elec, t1) == pytest.approx(expected, rel=1e-9)
    assert _onset(elec, t2) == pytest.approx(expected / 2, rel=1e-9)


def test_shorted_resistor_cannot_blind_without_heating():
    elec = _shorted()
    assert not any(is_blinded(p, elec) for p in np.logspace(-7, 0, 50))
    thermal = ThermalParams(0.1, thermal_resistance_for_onset(7e-3, elec))
    assert is_blinded(8e-3, elec, thermal)
    assert 4e-3 <= _onset(elec, thermal) <= 10e-3


@pytest.mark.parametrize("name", ["clavis2-det0", "clavis2-det1", "qpn5505-det0", "qpn5505-det1"])
def test_preset_thermal_switch_puts_onset_in_band(presets, name):
    ext = presets.extended({"detector": {"hot": {"base": name, "thermal": True, "r_bias": 0.0,
                                                 "responsivity": presets.detector(name).electrical.responsivity}}})
    d = ext.detector("hot")
    assert d.thermal is not None
    onset = _onset(d.electrical, d.thermal)
    assert onset == pytest.approx(7e-3, rel=1e-6)
    assert 4e-3 <= onset <= 10e-3


def test_presets_ship_with_thermal_off(presets):
    assert all(presets.detector(n).thermal is None
               for n in ("clavis2-det0", "clavis2-det1", "qpn5505-det0", "qpn5505-det1"))
