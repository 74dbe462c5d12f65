import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindqkd.countermeasure import Alarm, Watchdog, WatchdogConfig, monitor
from blindqkd.optics import OpticalFrame


def quantum_frames(n, mu=0.1):
    return (OpticalFrame(i, mean_photon_number=mu, phase=0.0) for i in range(n))


def test_quantum_traffic_never_alarms():
    # hc/lambda * 0.1 photons per 1 ns slot ~ 1.28e-11 W, five orders below 1 uW
    cfg = WatchdogConfig(threshold_power=1e-6, integration_window=100, period_ns=1.0)
    assert monitor(quantum_frames(1_000_000), cfg) == []


def test_blinding_light_alarms_on_first_full_window():
    cfg = WatchdogConfig(threshold_power=1e-6, integration_window=100)
    frames = (OpticalFrame(i, cw_power=397e-6) for i in range(1000))
    alarms = monitor(frames, cfg)
    assert alarms[0].slot_index == 99
    assert alarms[0].measured_power == pytest.approx(397e-6)
    assert len(alarms) == 10


def test_threshold_above_attack_power_is_silent():
    cfg = WatchdogConfig(threshold_power=10e-3, integration_window=100)
    frames = (OpticalFrame(i, cw_power=1.08e-3, pulse_peak_power=1.113e-3, pulse_duration=2.5)
              for i in range(10_000))
    assert monitor(frames, cfg) == []


def test_trigger_pulses_count_by_energy():
    cfg = WatchdogConfig(threshold_power=1e-9, integration_window=1, period_ns=200.0)
    w = Watchdog(cfg)
    alarm = w.feed(OpticalFrame(0, pulse_peak_power=1e-3, pulse_duration=2.0))
    assert alarm == Alarm(0, pytest.approx(1e-5))


def test_noise_floor_is_a_reading_floor():
    cfg = WatchdogConfig(threshold_power=1e-6, integration_window=10, noise_floor=2e-6)
    assert len(monitor(quantum_frames(100), cfg)) == 10


@pytest.mark.parametrize("kwargs", [dict(threshold_power=0.0), dict(threshold_power=1e-6, integration_window=0)])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        WatchdogConfig(**kwargs)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.floats(0, 2e-3), min_size=1, max_size=200),
    st.floats(1e-9, 3e-3),
    st.floats(1e-9, 3e-3),
    st.integers(1, 20),
)
def test_lower_threshold_never_removes_alarms(powers, t1, t2, window):
    lo, hi = sorted((t1, t2))
    frames = [OpticalFrame(i, cw_power=p) for i, p in enumerate(powers)]
    slots_lo = {a.slot_index for a in monitor(frames, WatchdogConfig(lo, window))}
    slots_hi = {a.slot_index for a in monitor(frames, WatchdogConfig(hi, window))}
    assert slots_hi <= slots_lo
