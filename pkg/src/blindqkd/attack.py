"""Faked-state eavesdropper built on detector blinding.

Eve cuts the fibre.  A replica of Bob (Bob') measures Alice's pulses in a
random basis; a replica of Alice (Alice') then keeps Bob's detectors blind
with CW light and, for every slot in which Bob' clicked, superimposes a
bright trigger pulse encoding Bob''s result.  Bob's detectors can only click
when his basis equals Eve's, and then exactly on Eve's bit.  A passive
listener on the public channel finally repeats Bob's post-processing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .detector import (
    ClickThresholds,
    Detector,
    DetectorElectrical,
    DetectorMode,
    GeigerParams,
    IDEAL_GEIGER,
)
from .optics import Basis, OpticalFrame, encode_phase
from .protocol.bb84 import BasisMode, bob_measure
from .protocol.transcript import Transcript, replay


class AttackError(ValueError):
    pass


class InfeasibleAttack(AttackError):
    def __init__(self, report: "FeasibilityReport"):
        super().__init__(str(report))
        self.report = report


def _uw(x: float) -> str:
    return f"{x * 1e6:.6g}"


@dataclass(frozen=True)
class FeasibilityReport:
    """Both sides of ``max P_always < 2 min P_never`` and the resulting trigger window."""

    feasible: bool
    max_p_always: float
    min_p_never: float
    basis_mode: BasisMode = BasisMode.ACTIVE

    @property
    def bound(self) -> float:
        return 2.0 * self.min_p_never

    @property
    def margin(self) -> float:
        return self.bound - self.max_p_always

    @property
    def interval(self) -> tuple[float, float]:
        """Open interval of trigger peak powers Eve may launch."""
        scale = 2.0 if self.basis_mode is BasisMode.PASSIVE else 1.0
        return (scale * self.max_p_always, scale * self.bound)

    def __bool__(self) -> bool:
        return self.feasible

    def __str__(self) -> str:
        lo, hi = self.interval
        if self.feasible:
            return f"feasible, interval ({_uw(lo)}, {_uw(hi)}) µW"
        return (
            f"infeasible: max P_always {_uw(self.max_p_always)} µW >= "
            f"2 min P_never {_uw(self.bound)} µW"
        )

    def to_dict(self) -> dict:
        lo, hi = self.interval
        return {
            "feasible": self.feasible,
            "basis_mode": self.basis_mode.value,
            "max_p_always": self.max_p_always,
            "two_min_p_never": self.bound,
            "margin": self.margin,
            "interval": [lo, hi],
        }


def feasible(thresholds: Sequence[ClickThresholds], basis_mode: BasisMode | str = BasisMode.ACTIVE) -> FeasibilityReport:
    """Check whether a single trigger can click any one detector and none of the others.

    The passive case reuses the same inequality: the matched detector sees
    half the launched power, every conjugate detector a quarter.
    """
    if not thresholds:
        raise AttackError("need thresholds for at least one detector")
    max_always = max(t.p_always for t in thresholds)
    min_never = min(t.p_never for t in thresholds)
    return FeasibilityReport(max_always < 2.0 * min_never, max_always, min_never, BasisMode(basis_mode))


def choose_trigger_power(thresholds: Sequence[ClickThresholds], basis_mode: BasisMode | str = BasisMode.ACTIVE) -> float:
    """Midpoint of the feasible trigger window (maximum margin on both sides)."""
    report = feasible(thresholds, basis_mode)
    if not report:
        raise InfeasibleAttack(report)
    lo, hi = report.interval
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class AttackConfig:
    cw_power: float
    trigger_peak_power: float | None = None
    bob_basis_mode: BasisMode = BasisMode.ACTIVE
    rate_match_target: float | None = None
    dark_count_emulation_rate: float = 0.0
    trigger_duration: float = 2.5
    trigger_offset: float = 2.5

    def __post_init__(self):
        if self.cw_power < 0:
            raise AttackError("cw_power must be non-negative")
        if not 0.0 <= self.dark_count_emulation_rate <= 1.0:
            raise AttackError("dark_count_emulation_rate must lie in [0, 1]")
        object.__setattr__(self, "bob_basis_mode", BasisMode(self.bob_basis_mode))

    def check_blinding(self, detectors: Sequence[Detector]) -> None:
        """Raise unless ``cw_power`` blinds every detector in ``detectors``."""
        for d in detectors:
            if d.expose(self.cw_power) is not DetectorMode.LINEAR:
                raise AttackError(
                    f"cw_power {_uw(self.cw_power)} µW does not blind {d.name} "
                    f"(p_blind {_uw(d.thresholds.p_blind)} µW)"
                )


@dataclass(frozen=True)
class EveRecord:
    slot_index: int
    basis: Basis | None
    bit: int | None
    forwarded: bool
    clicked: bool = False
    emulated: bool = False

    def __post_init__(self):
        if self.forwarded and not (self.clicked or self.emulated):
            raise AttackError("only slots where Bob' clicked (or emulated dark counts) are forwarded")


def bob_prime_detectors(geiger: GeigerParams = IDEAL_GEIGER) -> list[Detector]:
    """Eve's own receiver: two live, never-illuminated detectors."""
    elec = DetectorElectrical()
    th = ClickThresholds(p_never=1.0, p_always=2.0, p_blind=1.0)
    return [Detector(f"bob-prime-{i}", elec, th, geiger) for i in range(2)]


def eve_intercept(
    frame: OpticalFrame,
    rng,
    detectors: Sequence[Detector] | None = None,
    basis_rng=None,
    tie_rng=None,
) -> EveRecord:
    if frame.is_classical:
        raise AttackError("Eve intercepts only Alice's quantum-level frames")
    rec = bob_measure(frame, BasisMode.ACTIVE, detectors or bob_prime_detectors(), rng, basis_rng, tie_rng)
    return EveRecord(
        slot_index=frame.slot_index,
        basis=rec.basis,
        bit=rec.resolved_bit,
        forwarded=rec.clicked,
        clicked=rec.clicked,
    )


def eve_resend(record: EveRecord, config: AttackConfig) -> OpticalFrame:
    if not record.forwarded:
        return OpticalFrame(slot_index=record.slot_index, cw_power=config.cw_power)
    if config.trigger_peak_power is None:
        raise AttackError("trigger_peak_power not resolved; call choose_trigger_power first")
    return OpticalFrame(
        slot_index=record.slot_index,
        cw_power=config.cw_power,
        pulse_peak_power=config.trigger_peak_power,
        pulse_duration=config.trigger_duration,
        phase=encode_phase(record.bit, record.basis),
        pulse_offset=config.trigger_offset,
    )


def match_rate(
    eve_click_rate: float,
    expected_bob_rate: float,
    dark_emulation_rate: float = 0.0,
    basis_mode: BasisMode | str = BasisMode.ACTIVE,
) -> float:
    """Probability with which Eve drops a forwarded click so Bob sees his usual click rate.

    With forwarding fraction ``f = (1 - s) * eve_click_rate`` and emulated
    triggers on a fraction ``d`` of the remaining slots, Bob clicks on a
    fraction ``c * (f + d * (1 - f))`` of slots, where ``c`` is 1/2 for an
    active basis choice and 1 for a passive one.
    """
    c = 1.0 if BasisMode(basis_mode) is BasisMode.PASSIVE else 0.5
    d = dark_emulation_rate
    if d >= 1.0:
        raise AttackError("dark-count emulation on every slot leaves no room for rate matching")
    f = (expected_bob_rate / c - d) / (1.0 - d)
    if f < 0:
        raise AttackError(
            f"emulated dark counts alone ({c * d:.3g}/slot) exceed the expected Bob rate "
            f"{expected_bob_rate:.3g}/slot"
        )
    if f > eve_click_rate * (1 + 1e-12):
        raise AttackError(
            f"rate-starved: Eve clicks on {eve_click_rate:.3g}/slot, so at most "
            f"{c * eve_click_rate:.3g}/slot reach Bob, below the expected {expected_bob_rate:.3g}/slot"
        )
    if eve_click_rate == 0:
        return 0.0
    return max(0.0, 1.0 - f / eve_click_rate)


def emulate_dark_count(slot: int, rate: float, rng) -> EveRecord | None:
    """Inject a random-bit, random-basis trigger in ``slot`` with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise AttackError(f"emulation rate must lie in [0, 1], got {rate!r}")
    if rate == 0.0 or rng.random() >= rate:
        return None
    bit = int(rng.random() < 0.5)
    basis = Basis.from_index(int(rng.random() < 0.5))
    return EveRecord(slot, basis, bit, forwarded=True, emulated=True)


def emulate_dark_counts(rate: float, rng, slots: int) -> list[EveRecord]:
    out = []
    for slot in range(slots):
        rec = emulate_dark_count(slot, rate, rng)
        if rec is not None:
            out.append(rec)
    return out


def eve_raw_key(records: Sequence[EveRecord], slots: int) -> np.ndarray:
    """Per-slot array of Eve's bits, -1 where she has none."""
    raw = np.full(slots, -1, dtype=np.int8)
    for r in records:
        if r.bit is not None and (r.clicked or r.emulated):
            raw[r.slot_index] = r.bit
    return raw


def replay_transcript(eve_raw: Sequence[int] | np.ndarray, transcript: Transcript) -> np.ndarray:
    """Eve's final key: Bob's public post-processing applied to her raw bits."""
    return replay(eve_raw, transcript)


def eve_click_probability(mu_at_eve: float, geiger: GeigerParams = IDEAL_GEIGER) -> float:
    """Probability that an active Bob' with two identical detectors clicks on a pulse."""
    return 1.0 - (1.0 - geiger.dark_count_prob) ** 2 * math.exp(-geiger.efficiency * mu_at_eve)
