"""Optical frames, fibre loss, Eve's amplifier and the final interferometer coupler.

Every slot of the link is carried by one :class:`OpticalFrame`.  A frame is
either quantum-level (a weak coherent pulse described only by its mean photon
number) or classical (CW background plus a superimposed bright pulse).  The
CW background is specified per detector line: it does not interfere and every
detector behind the coupler sees it in full.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299_792_458.0
DEFAULT_WAVELENGTH = 1550e-9


class Basis(str, enum.Enum):
    Z = "Z"
    X = "X"

    @classmethod
    def from_index(cls, i: int) -> "Basis":
        return cls.X if i else cls.Z


class OpticsError(ValueError):
    pass


def photon_energy(wavelength: float = DEFAULT_WAVELENGTH) -> float:
    """Energy of one photon in joules."""
    return PLANCK * LIGHT_SPEED / wavelength


def db_to_factor(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class OpticalFrame:
    """Light content of one time slot.

    Powers are in watts, ``pulse_duration`` and ``pulse_offset`` in
    nanoseconds (offset is measured from the end of the gate), ``phase`` in
    radians.
    """

    slot_index: int = 0
    cw_power: float = 0.0
    pulse_peak_power: float = 0.0
    pulse_duration: float = 0.0
    phase: float = 0.0
    mean_photon_number: float = 0.0
    pulse_offset: float = 0.0

    def __post_init__(self):
        for name in ("cw_power", "pulse_peak_power", "mean_photon_number"):
            if getattr(self, name) < 0:
                raise OpticsError(f"{name} must be non-negative, got {getattr(self, name)!r}")

    @property
    def is_quantum(self) -> bool:
        return (
            self.cw_power == 0.0
            and self.pulse_peak_power == 0.0
            and self.mean_photon_number > 0.0
        )

    @property
    def is_classical(self) -> bool:
        return not self.is_quantum

    def average_power(self, period_ns: float, wavelength: float = DEFAULT_WAVELENGTH) -> float:
        """Time-averaged power over one slot of length ``period_ns``."""
        pulse_energy = self.pulse_peak_power * self.pulse_duration * 1e-9
        photon_energy_total = self.mean_photon_number * photon_energy(wavelength)
        return self.cw_power + (pulse_energy + photon_energy_total) / (period_ns * 1e-9)


@dataclass(frozen=True)
class ChannelParams:
    """One fibre segment.

    ``gain_db`` is the gain of Eve's amplifier placed before the segment;
    ``flip_prob`` injects phase flips (bit errors) on quantum-level frames.
    """

    loss_db: float = 0.0
    gain_db: float = 0.0
    flip_prob: float = 0.0

    def __post_init__(self):
        if self.loss_db < 0:
            raise OpticsError(f"loss_db must be >= 0, got {self.loss_db!r}")
        if self.gain_db < 0:
            raise OpticsError(f"gain_db must be >= 0, got {self.gain_db!r}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise OpticsError(f"flip_prob must lie in [0, 1], got {self.flip_prob!r}")

    @property
    def transmittance(self) -> float:
        return db_to_factor(-self.loss_db)


def _scale(frame: OpticalFrame, factor: float) -> OpticalFrame:
    return replace(
        frame,
        cw_power=frame.cw_power * factor,
        pulse_peak_power=frame.pulse_peak_power * factor,
        mean_photon_number=frame.mean_photon_number * factor,
    )


def attenuate(frame: OpticalFrame, loss_db: float) -> OpticalFrame:
    if loss_db < 0:
        raise OpticsError(f"loss must be non-negative, got {loss_db!r} dB")
    if loss_db == 0:
        return frame
    return _scale(frame, db_to_factor(-loss_db))


def amplify(frame: OpticalFrame, gain_db: float) -> OpticalFrame:
    """Eve's optical amplifier.  Only classical light may pass through it."""
    if frame.is_quantum:
        raise OpticsError("refusing to amplify a quantum-level frame")
    if gain_db < 0:
        raise OpticsError(f"gain must be non-negative, got {gain_db!r} dB")
    if gain_db == 0:
        return frame
    return _scale(frame, db_to_factor(gain_db))


_PHASES = {
    (0, Basis.Z): 0.0,
    (1, Basis.Z): math.pi,
    (0, Basis.X): math.pi / 2,
    (1, Basis.X): 3 * math.pi / 2,
}


def encode_phase(bit: int, basis: Basis | str) -> float:
    return _PHASES[(int(bit), Basis(basis))]


def analyzer_phase(basis: Basis | str) -> float:
    """Phase Bob applies in his interferometer arm to measure ``basis``."""
    return encode_phase(0, basis)


def interfere(incident_power: float, delta_phase: float) -> tuple[float, float]:
    """Split ``incident_power`` between detector 0 and detector 1 at the output coupler.

    ``delta_phase`` is Bob's analyzer phase minus the incoming phase.  The
    second output is taken as the complement of the first so the two always
    sum to the input.
    """
    p0 = incident_power * math.cos(delta_phase / 2.0) ** 2
    return p0, incident_power - p0
