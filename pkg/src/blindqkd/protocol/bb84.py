"""BB84 roles: Alice's source, Bob's receiver, sifting and QBER estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ..detector import ClickCause, ClickOutcome, Detector, Incident, detect_frame
from ..optics import Basis, OpticalFrame, analyzer_phase, encode_phase, interfere
from .transcript import BasisAnnouncement, DetectionReport, QberSample, SiftResult, Transcript


class ProtocolError(ValueError):
    pass


class BasisMode(str, enum.Enum):
    ACTIVE = "active"
    PASSIVE = "passive"


@dataclass(frozen=True)
class SlotRecord:
    """What one party knows about one slot.

    For Alice ``bit`` and ``basis`` are her preparation.  For a receiver they
    are the measurement result; ``resolved_bit`` is None when nothing clicked.
    """

    slot_index: int
    bit: int | None
    basis: Basis | None
    clicked0: bool = False
    clicked1: bool = False
    resolved_bit: int | None = None
    double_click: bool = False
    causes: tuple[ClickCause, ...] = ()

    @property
    def clicked(self) -> bool:
        return self.resolved_bit is not None


@dataclass
class KeyMaterial:
    raw: np.ndarray
    sifted: np.ndarray
    corrected: np.ndarray
    final: np.ndarray

    def __post_init__(self):
        sizes = [self.raw.size, self.sifted.size, self.corrected.size, self.final.size]
        if sizes != sorted(sizes, reverse=True):
            raise ProtocolError(f"key lengths must shrink monotonically, got {sizes}")


def alice_prepare(slot: int, rng, mu: float, basis_rng=None) -> tuple[OpticalFrame, SlotRecord]:
    """Draw a uniform bit and basis and emit a weak coherent pulse.

    ``rng`` supplies the bit and ``basis_rng`` (default: ``rng``) the basis.
    """
    if mu <= 0:
        raise ProtocolError(f"mean photon number must be > 0, got {mu!r}")
    bit = int(rng.random() < 0.5)
    basis = Basis.from_index(int((basis_rng or rng).random() < 0.5))
    frame = OpticalFrame(slot_index=slot, phase=encode_phase(bit, basis), mean_photon_number=mu)
    return frame, SlotRecord(slot_index=slot, bit=bit, basis=basis)


def _analyzer_incidents(frame: OpticalFrame, basis: Basis, share: float) -> tuple[Incident, Incident]:
    delta = analyzer_phase(basis) - frame.phase
    p0, p1 = interfere(frame.pulse_peak_power * share, delta)
    m0, m1 = interfere(frame.mean_photon_number * share, delta)
    return (
        Incident(frame.cw_power, p0, m0, frame.pulse_duration),
        Incident(frame.cw_power, p1, m1, frame.pulse_duration),
    )


class Measurement(NamedTuple):
    basis: Basis
    outcomes: tuple[ClickOutcome, ClickOutcome]


def _resolve(slot: int, analyzers: Sequence[Measurement], tie_rng) -> SlotRecord:
    clicked = [m for m in analyzers if m.outcomes[0].clicked or m.outcomes[1].clicked]
    causes = tuple(o.cause for m in analyzers for o in m.outcomes if o.clicked)
    if not clicked:
        basis = analyzers[0].basis if len(analyzers) == 1 else None
        return SlotRecord(slot, None, basis, causes=causes)
    double = len(causes) > 1
    m = clicked[0] if len(clicked) == 1 else clicked[int(tie_rng.random() < 0.5)]
    c0, c1 = m.outcomes[0].clicked, m.outcomes[1].clicked
    bit = int(tie_rng.random() < 0.5) if c0 and c1 else int(c1)
    return SlotRecord(slot, bit, m.basis, c0, c1, bit, double, causes)


def bob_measure(
    frame: OpticalFrame,
    basis_mode: BasisMode | str,
    detectors: Sequence[Detector],
    rng,
    basis_rng=None,
    tie_rng=None,
) -> SlotRecord:
    """Measure one frame.

    Active mode needs two detectors and picks a uniform basis from
    ``basis_rng``.  Passive mode needs four detectors (Z0, Z1, X0, X1) behind
    a 50/50 basis splitter.  Double clicks resolve to a uniformly random bit
    (and basis, across analyzers) drawn from ``tie_rng``.
    """
    basis_rng = basis_rng or rng
    tie_rng = tie_rng or rng
    mode = BasisMode(basis_mode)
    if mode is BasisMode.ACTIVE:
        if len(detectors) != 2:
            raise ProtocolError("active basis choice needs exactly 2 detectors")
        basis = Basis.from_index(int(basis_rng.random() < 0.5))
        outcomes = detect_frame(_analyzer_incidents(frame, basis, 1.0), detectors, rng)
        analyzers = [Measurement(basis, outcomes)]
    else:
        if len(detectors) != 4:
            raise ProtocolError("passive basis choice needs exactly 4 detectors")
        incidents = _analyzer_incidents(frame, Basis.Z, 0.5) + _analyzer_incidents(frame, Basis.X, 0.5)
        outcomes = detect_frame(incidents, detectors, rng)
        analyzers = [Measurement(Basis.Z, outcomes[:2]), Measurement(Basis.X, outcomes[2:])]
    return _resolve(frame.slot_index, analyzers, tie_rng)


@dataclass
class SiftedKeys:
    alice: np.ndarray
    bob: np.ndarray
    indices: np.ndarray


def sift(alice_records: Sequence[SlotRecord], bob_records: Sequence[SlotRecord], transcript: Transcript) -> SiftedKeys:
    if len(alice_records) != len(bob_records):
        raise ProtocolError(
            f"slot count mismatch: Alice {len(alice_records)}, Bob {len(bob_records)}"
        )
    clicked = [b for b in bob_records if b.clicked]
    transcript.append(DetectionReport(slots=tuple(b.slot_index for b in clicked)))
    transcript.append(
        BasisAnnouncement(slots=tuple(b.slot_index for b in clicked), bases=tuple(b.basis.value for b in clicked))
    )
    keep = [i for i, (a, b) in enumerate(zip(alice_records, bob_records)) if b.clicked and a.basis == b.basis]
    slots = tuple(bob_records[i].slot_index for i in keep)
    transcript.append(SiftResult(indices=slots))
    return SiftedKeys(
        alice=np.fromiter((alice_records[i].bit for i in keep), dtype=np.uint8, count=len(keep)),
        bob=np.fromiter((bob_records[i].resolved_bit for i in keep), dtype=np.uint8, count=len(keep)),
        indices=np.asarray(slots, dtype=np.int64),
    )


def estimate_qber(
    alice_key: np.ndarray,
    bob_key: np.ndarray,
    sample_fraction: float,
    rng: np.random.Generator,
    transcript: Transcript,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Disclose a random sample, return its error fraction and the undisclosed remainder of both keys."""
    if not 0 < sample_fraction <= 1:
        raise ProtocolError(f"sample fraction must lie in (0, 1], got {sample_fraction!r}")
    n = len(alice_key)
    if n == 0:
        raise ProtocolError("cannot estimate QBER on an empty sifted key")
    if len(bob_key) != n:
        raise ProtocolError("keys differ in length")
    k = min(n, max(1, int(round(sample_fraction * n))))
    idx = np.sort(rng.choice(n, size=k, replace=False))
    a, b = np.asarray(alice_key)[idx], np.asarray(bob_key)[idx]
    qber = float(np.count_nonzero(a != b)) / k
    transcript.append(
        QberSample(indices=tuple(int(i) for i in idx), alice_bits=tuple(int(x) for x in a),
                   bob_bits=tuple(int(x) for x in b), qber=qber)
    )
    return qber, np.delete(alice_key, idx), np.delete(bob_key, idx)
