"""Gated avalanche-photodiode detector.

The lumped model has three regimes:

* Geiger mode inside each gate, when the CW photocurrent through the bias
  resistor has not pulled the gated bias below breakdown.  Clicks follow the
  usual ``1 - (1 - p_dc) exp(-eta mu)`` law.
* Linear mode when blinded.  The APD is then a classical photodiode and only a
  bright pulse superimposed on the CW light can click it, controlled by the
  ``p_never`` / ``p_always`` thresholds.
* Optional thermal blinding: dissipated power raises the breakdown voltage,
  which blinds the detector even with the bias resistor shorted.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

from .optics import photon_energy

# Absolute slack when comparing the gated bias peak against breakdown.
_BIAS_TOL = 1e-9


class DetectorError(ValueError):
    pass


class ClickCause(str, enum.Enum):
    PHOTON = "photon"
    DARK = "dark"
    LINEAR_THRESHOLD = "linear_threshold"
    NONE = "none"


class DetectorMode(str, enum.Enum):
    GEIGER = "geiger"
    LINEAR = "linear"


@dataclass(frozen=True)
class ClickOutcome:
    clicked: bool
    cause: ClickCause

    def __post_init__(self):
        if self.clicked != (self.cause is not ClickCause.NONE):
            raise DetectorError(f"inconsistent outcome: clicked={self.clicked}, cause={self.cause}")


NO_CLICK = ClickOutcome(False, ClickCause.NONE)
PHOTON_CLICK = ClickOutcome(True, ClickCause.PHOTON)
DARK_CLICK = ClickOutcome(True, ClickCause.DARK)
LINEAR_CLICK = ClickOutcome(True, ClickCause.LINEAR_THRESHOLD)


@dataclass(frozen=True)
class DetectorElectrical:
    """Bias circuit of one APD.

    The DC bias with no light sits ``dc_margin`` below breakdown, so when
    ``v_br`` is left unset it is taken as ``v_hv + dc_margin``.  A
    ``r_bias`` of zero models a shorted bias resistor.
    """

    v_hv: float = 50.0
    r_bias: float = 1000.0
    v_br: float | None = None
    gate_amplitude: float = 3.0
    dc_margin: float = 0.5
    responsivity: float = 1.0
    i_th: float = 0.0

    def __post_init__(self):
        if self.r_bias < 0:
            raise DetectorError(f"r_bias must be >= 0, got {self.r_bias!r}")
        if not self.gate_amplitude > self.dc_margin > 0:
            raise DetectorError("require gate_amplitude > dc_margin > 0")
        if self.responsivity <= 0:
            raise DetectorError(f"responsivity must be > 0, got {self.responsivity!r}")
        if self.v_br is None:
            object.__setattr__(self, "v_br", self.v_hv + self.dc_margin)

    @property
    def excess_bias(self) -> float:
        """Voltage by which an unilluminated gate overshoots breakdown."""
        return self.v_hv + self.gate_amplitude - self.v_br

    def shorted(self) -> "DetectorElectrical":
        return replace(self, r_bias=0.0)


@dataclass(frozen=True)
class ClickThresholds:
    p_never: float
    p_always: float
    p_blind: float

    def __post_init__(self):
        if not 0 < self.p_never < self.p_always:
            raise DetectorError(
                f"require 0 < p_never < p_always, got {self.p_never!r}, {self.p_always!r}"
            )
        if self.p_blind <= 0:
            raise DetectorError(f"p_blind must be > 0, got {self.p_blind!r}")


@dataclass(frozen=True)
class ThresholdTable:
    """Click thresholds measured at several CW blinding powers.

    Lookup interpolates linearly and clamps to the end points.
    """

    blinding_power: tuple[float, ...]
    p_never: tuple[float, ...]
    p_always: tuple[float, ...]

    def __post_init__(self):
        n = len(self.blinding_power)
        if n == 0 or len(self.p_never) != n or len(self.p_always) != n:
            raise DetectorError("threshold table columns must be non-empty and of equal length")
        if any(b >= a for b, a in zip(self.blinding_power, self.blinding_power[1:])):
            raise DetectorError("threshold table blinding powers must be strictly increasing")

    def at(self, cw_power: float, p_blind: float) -> ClickThresholds:
        return ClickThresholds(
            p_never=float(np.interp(cw_power, self.blinding_power, self.p_never)),
            p_always=float(np.interp(cw_power, self.blinding_power, self.p_always)),
            p_blind=p_blind,
        )


@dataclass(frozen=True)
class GateSchedule:
    period: float = 200.0
    gate_width: float = 2.5

    def __post_init__(self):
        if not 0 < self.gate_width < self.period:
            raise DetectorError("require 0 < gate_width < period")


@dataclass(frozen=True)
class GeigerParams:
    efficiency: float = 0.1
    dark_count_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DetectorError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")
        if not 0.0 <= self.dark_count_prob <= 1.0:
            raise DetectorError(f"dark_count_prob must lie in [0, 1], got {self.dark_count_prob!r}")


IDEAL_GEIGER = GeigerParams(efficiency=1.0, dark_count_prob=0.0)


# Self-heating onset used when a preset enables the thermal path without naming one.
DEFAULT_THERMAL_ONSET = 7e-3


@dataclass(frozen=True)
class ThermalParams:
    dvbr_per_kelvin: float = 0.1
    thermal_resistance: float = 10.0
    enabled: bool = True

    def __post_init__(self):
        if self.dvbr_per_kelvin <= 0 or self.thermal_resistance <= 0:
            raise DetectorError("thermal parameters must be positive")


def bias_at_t1(p_cw: float, elec: DetectorElectrical) -> float:
    """DC bias left on the APD after the CW photocurrent drops across ``r_bias``."""
    if p_cw < 0:
        raise DetectorError(f"CW power must be non-negative, got {p_cw!r}")
    return max(elec.v_hv - elec.responsivity * p_cw * elec.r_bias, 0.0)


def calibrate_responsivity(p_blind: float, elec: DetectorElectrical) -> float:
    """Responsivity at which the bias droop exactly eats the gate excess at ``p_blind``."""
    if p_blind <= 0:
        raise DetectorError(f"p_blind must be > 0, got {p_blind!r}")
    if elec.r_bias <= 0:
        raise DetectorError("cannot calibrate against a shorted bias resistor")
    return (elec.gate_amplitude - elec.dc_margin) / (p_blind * elec.r_bias)


def electrical_dissipation(p_cw: float, elec: DetectorElectrical) -> float:
    """Power dissipated in the APD by the CW photocurrent, in watts."""
    return elec.responsivity * p_cw * bias_at_t1(p_cw, elec)


def thermal_blind_shift(p_cw: float, thermal: ThermalParams | None, elec: DetectorElectrical) -> float:
    """Rise of the breakdown voltage caused by self-heating, in volts."""
    if thermal is None or not thermal.enabled:
        raise DetectorError("thermal sub-model is disabled")
    return thermal.dvbr_per_kelvin * thermal.thermal_resistance * electrical_dissipation(p_cw, elec)


def thermal_resistance_for_onset(
    onset_power: float, elec: DetectorElectrical, dvbr_per_kelvin: float = 0.1
) -> float:
    """Thermal resistance (degC/W) that puts the thermal blinding onset at ``onset_power``."""
    excess = bias_at_t1(onset_power, elec) + elec.gate_amplitude - elec.v_br
    dissipation = electrical_dissipation(onset_power, elec)
    if excess <= 0 or dissipation <= 0:
        raise DetectorError("detector is already electrically blind at the requested onset")
    return excess / (dvbr_per_kelvin * dissipation)


def is_blinded(p_cw: float, elec: DetectorElectrical, thermal: ThermalParams | None = None) -> bool:
    """True when the gate can no longer lift the APD above breakdown."""
    v_br = elec.v_br
    if thermal is not None and thermal.enabled:
        v_br += thermal_blind_shift(p_cw, thermal, elec)
    return bias_at_t1(p_cw, elec) + elec.gate_amplitude <= v_br + _BIAS_TOL


def geiger_click_probability(mean_photon_number: float, geiger: GeigerParams) -> float:
    return 1.0 - (1.0 - geiger.dark_count_prob) * math.exp(-geiger.efficiency * mean_photon_number)


def geiger_click(mean_photon_number: float, geiger: GeigerParams, rng) -> ClickOutcome:
    # Two draws every call so the noise stream advances identically per gate.
    u_photon = rng.random()
    u_dark = rng.random()
    if u_photon < -math.expm1(-geiger.efficiency * mean_photon_number):
        return PHOTON_CLICK
    if u_dark < geiger.dark_count_prob:
        return DARK_CLICK
    return NO_CLICK


def linear_click_probability(peak_power: float, th: ClickThresholds) -> float:
    """Linear ramp between the two measured endpoints."""
    if peak_power <= th.p_never:
        return 0.0
    if peak_power >= th.p_always:
        return 1.0
    return (peak_power - th.p_never) / (th.p_always - th.p_never)


def linear_click(peak_power: float, th: ClickThresholds, rng) -> ClickOutcome:
    p = linear_click_probability(peak_power, th)
    if p == 0.0:
        return NO_CLICK
    if p == 1.0 or rng.random() < p:
        return LINEAR_CLICK
    return NO_CLICK


class Incident(NamedTuple):
    """Light reaching one detector during one slot."""

    cw_power: float = 0.0
    pulse_power: float = 0.0
    mean_photon_number: float = 0.0
    pulse_duration: float = 0.0


@dataclass
class Detector:
    """One APD with its configuration and runtime state.

    ``bias`` and ``mode`` follow the CW illumination seen on the last call to
    :meth:`expose`.
    """

    name: str
    electrical: DetectorElectrical
    thresholds: ClickThresholds
    geiger: GeigerParams = field(default_factory=GeigerParams)
    schedule: GateSchedule = field(default_factory=GateSchedule)
    threshold_table: ThresholdTable | None = None
    thermal: ThermalParams | None = None
    wavelength: float = 1550e-9
    bias: float = field(init=False)
    mode: DetectorMode = field(init=False, default=DetectorMode.GEIGER)

    def __post_init__(self):
        self.bias = self.electrical.v_hv
        self._last_cw = None
        self._photon_energy = photon_energy(self.wavelength)

    def expose(self, cw_power: float) -> DetectorMode:
        if cw_power != self._last_cw:
            self.bias = bias_at_t1(cw_power, self.electrical)
            blind = is_blinded(cw_power, self.electrical, self.thermal)
            self.mode = DetectorMode.LINEAR if blind else DetectorMode.GEIGER
            self._last_cw = cw_power
        return self.mode

    @property
    def blinded(self) -> bool:
        return self.mode is DetectorMode.LINEAR

    def thresholds_at(self, cw_power: float) -> ClickThresholds:
        if self.threshold_table is None:
            return self.thresholds
        return self.threshold_table.at(cw_power, self.thresholds.p_blind)

    def respond(self, incident: Incident, rng, gate_open: bool = True) -> ClickOutcome:
        if self.expose(incident.cw_power) is DetectorMode.LINEAR:
            return linear_click(incident.pulse_power, self.thresholds_at(incident.cw_power), rng)
        if not gate_open:
            if incident.pulse_power > 0:
                return linear_click(incident.pulse_power, self.thresholds_at(incident.cw_power), rng)
            return NO_CLICK
        mu = incident.mean_photon_number
        if incident.cw_power > 0 or incident.pulse_power > 0:
            # Classical light inside the gate is counted in photons.
            window = min(incident.pulse_duration, self.schedule.gate_width) if incident.pulse_power else 0.0
            energy = (incident.cw_power * self.schedule.gate_width + incident.pulse_power * window) * 1e-9
            mu += energy / self._photon_energy
        return geiger_click(mu, self.geiger, rng)


def detect_frame(
    incidents: Sequence[Incident], detectors: Sequence[Detector], rng, gate_open: bool = True
) -> tuple[ClickOutcome, ...]:
    if len(incidents) != len(detectors):
        raise DetectorError("one incident per detector required")
    return tuple(d.respond(inc, rng, gate_open) for inc, d in zip(incidents, detectors))
