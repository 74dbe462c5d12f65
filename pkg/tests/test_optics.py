import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blindqkd.optics import (
    Basis,
    ChannelParams,
    OpticalFrame,
    OpticsError,
    amplify,
    analyzer_phase,
    attenuate,
    encode_phase,
    interfere,
)

powers = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
phases = st.floats(min_value=-4 * math.pi, max_value=4 * math.pi, allow_nan=False)
losses = st.floats(min_value=0.0, max_value=60.0, allow_nan=False)


def test_attenuate_half_power_point():
    out = attenuate(OpticalFrame(cw_power=1.0e-3), 3.0103)
    assert out.cw_power == pytest.approx(0.5e-3, rel=1e-5)


def test_attenuate_identity_on_quantum_frame():
    f = OpticalFrame(mean_photon_number=0.1, phase=math.pi)
    assert attenuate(f, 0.0) == f


def test_attenuate_ten_db():
    out = attenuate(OpticalFrame(pulse_peak_power=932e-6, phase=1.0), 10.0)
    assert out.pulse_peak_power == pytest.approx(93.2e-6, rel=1e-12)
    assert out.phase == 1.0


def test_attenuate_rejects_negative_loss():
    with pytest.raises(OpticsError):
        attenuate(OpticalFrame(cw_power=1.0), -1.0)


@pytest.mark.parametrize(
    "field, before, gain, after",
    [
        ("pulse_peak_power", 100e-6, 10.0, 1e-3),
        ("pulse_peak_power", 808e-6, 0.0, 808e-6),
        ("cw_power", 60e-6, 3.0103, 120e-6),
    ],
)
def test_amplify(field, before, gain, after):
    out = amplify(OpticalFrame(**{field: before}), gain)
    assert getattr(out, field) == pytest.approx(after, rel=1e-5)


def test_amplify_refuses_quantum_frames():
    with pytest.raises(OpticsError):
        amplify(OpticalFrame(mean_photon_number=0.1), 10.0)


def test_frame_regimes():
    assert OpticalFrame(mean_photon_number=0.1).is_quantum
    assert OpticalFrame(cw_power=1e-6, mean_photon_number=0.1).is_classical
    assert OpticalFrame().is_classical
    with pytest.raises(OpticsError):
        OpticalFrame(cw_power=-1.0)


def test_channel_transmittance():
    assert ChannelParams(loss_db=0.0).transmittance == 1.0
    assert ChannelParams(loss_db=10.0).transmittance == pytest.approx(0.1)
    with pytest.raises(OpticsError):
        ChannelParams(loss_db=-0.1)


@pytest.mark.parametrize(
    "bit, basis, phase",
    [(0, "Z", 0.0), (1, "Z", math.pi), (0, "X", math.pi / 2), (1, "X", 3 * math.pi / 2)],
)
def test_encode_phase_alphabet(bit, basis, phase):
    assert encode_phase(bit, basis) == phase


def test_encode_phase_injective_and_decoding():
    table = {(b, B): encode_phase(b, B) for b in (0, 1) for B in Basis}
    assert len(set(table.values())) == 4
    for (bit, basis), phi in table.items():
        for bob in Basis:
            delta = (analyzer_phase(bob) - phi) % (2 * math.pi)
            decodes = any(math.isclose(delta, t, abs_tol=1e-12) for t in (0.0, math.pi, 2 * math.pi))
            assert decodes == (bob == basis)


def test_interfere_examples():
    P = 1.113e-3
    assert interfere(P, 0.0) == (P, 0.0)
    p0, p1 = interfere(P, math.pi / 2)
    assert p0 == pytest.approx(P / 2, rel=1e-12) and p1 == pytest.approx(P / 2, rel=1e-12)
    p0, p1 = interfere(P, math.pi)
    assert p0 == pytest.approx(0.0, abs=1e-15 * P) and p1 == pytest.approx(P, rel=1e-12)


@given(powers, phases)
def test_interfere_conserves_energy(P, dphi):
    p0, p1 = interfere(P, dphi)
    assert p0 >= 0 and p1 >= -1e-18
    assert abs(p0 + p1 - P) <= 1e-12 * P


@given(powers, losses, losses)
def test_attenuation_composes(P, a, b):
    f = OpticalFrame(cw_power=P, pulse_peak_power=P / 2, mean_photon_number=P * 3)
    once = attenuate(f, a + b)
    twice = attenuate(attenuate(f, a), b)
    for name in ("cw_power", "pulse_peak_power", "mean_photon_number"):
        assert getattr(twice, name) == pytest.approx(getattr(once, name), rel=1e-12, abs=0)


@given(st.floats(min_value=1e-9, max_value=1.0), losses)
def test_amplify_undoes_attenuate(P, x):
    f = OpticalFrame(cw_power=P, pulse_peak_power=2 * P)
    back = amplify(attenuate(f, x), x)
    assert back.cw_power == pytest.approx(f.cw_power, rel=1e-12)
    assert back.pulse_peak_power == pytest.approx(f.pulse_peak_power, rel=1e-12)


def test_average_power_of_weak_pulse():
    # mu = 0.1 at 1550 nm, 1 ns slots: 0.1 * h c / lambda / 1 ns
    f = OpticalFrame(mean_photon_number=0.1)
    assert f.average_power(1.0) == pytest.approx(1.2815779723541474e-11, rel=1e-12)
