"""Public classical channel: the ordered, append-only message log.

Everything Alice and Bob say to each other during sifting, parameter
estimation, reconciliation and privacy amplification ends up here.  Any
listener can therefore repeat Bob's key processing with :func:`replay`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import ClassVar, Iterable, Iterator, Sequence

import numpy as np


class TranscriptError(ValueError):
    pass


def pack_bits(bits: Sequence[int] | np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def unpack_bits(hexstr: str, length: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
    return np.unpackbits(raw)[:length].astype(np.uint8)


@dataclass(frozen=True)
class Message:
    kind: ClassVar[str] = "message"

    def to_dict(self) -> dict:
        return {"kind": self.kind, **asdict(self)}


@dataclass(frozen=True)
class DetectionReport(Message):
    kind: ClassVar[str] = "detection_report"
    slots: tuple[int, ...]


@dataclass(frozen=True)
class BasisAnnouncement(Message):
    kind: ClassVar[str] = "basis_announcement"
    slots: tuple[int, ...]
    bases: tuple[str, ...]


@dataclass(frozen=True)
class SiftResult(Message):
    kind: ClassVar[str] = "sift_result"
    indices: tuple[int, ...]


@dataclass(frozen=True)
class QberSample(Message):
    kind: ClassVar[str] = "qber_sample"
    indices: tuple[int, ...]
    alice_bits: tuple[int, ...]
    bob_bits: tuple[int, ...]
    qber: float


@dataclass(frozen=True)
class ParityRound(Message):
    kind: ClassVar[str] = "parity_round"
    pass_index: int
    block_size: int
    permutation_seed: int | None
    block_parities: tuple[int, ...]
    search_parities: tuple[int, ...]
    corrections: tuple[int, ...]


@dataclass(frozen=True)
class Verification(Message):
    kind: ClassVar[str] = "verification"
    seed: int
    tag_bits: int
    tag: str
    ok: bool


@dataclass(frozen=True)
class Abort(Message):
    kind: ClassVar[str] = "abort"
    reason: str


@dataclass(frozen=True)
class PaSeed(Message):
    kind: ClassVar[str] = "pa_seed"
    seed: str
    seed_length: int
    input_length: int
    output_length: int

    def seed_bits(self) -> np.ndarray:
        return unpack_bits(self.seed, self.seed_length)


MESSAGE_TYPES = {
    cls.kind: cls
    for cls in (
        DetectionReport, BasisAnnouncement, SiftResult, QberSample,
        ParityRound, Verification, Abort, PaSeed,
    )
}


def message_from_dict(d: dict) -> Message:
    d = dict(d)
    try:
        cls = MESSAGE_TYPES[d.pop("kind")]
    except KeyError as exc:
        raise TranscriptError(f"unknown message kind {exc}") from None
    kwargs = {}
    for f in fields(cls):
        value = d[f.name]
        kwargs[f.name] = tuple(value) if isinstance(value, list) else value
    return cls(**kwargs)


class Transcript:
    """Append-only list of public messages."""

    def __init__(self, messages: Iterable[Message] = ()):
        self._messages: list[Message] = []
        for m in messages:
            self.append(m)

    def append(self, message: Message) -> None:
        if not isinstance(message, Message):
            raise TypeError(f"not a transcript message: {message!r}")
        self._messages.append(message)

    def __iter__(self) -> Iterator[Message]:
        return iter(tuple(self._messages))

    def __len__(self) -> int:
        return len(self._messages)

    def __getitem__(self, i):
        return self._messages[i]

    def of_kind(self, cls: type[Message]) -> list[Message]:
        return [m for m in self._messages if isinstance(m, cls)]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(m.to_dict(), sort_keys=True) + "\n" for m in self._messages)

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        return cls(message_from_dict(json.loads(line)) for line in text.splitlines() if line.strip())


def replay(raw_bits: Sequence[int] | np.ndarray, transcript: Transcript) -> np.ndarray:
    """Apply every public post-processing decision to a per-slot raw key.

    ``raw_bits[slot]`` is the listener's bit for ``slot``; negative entries
    (no bit) are read as 0.
    """
    # Local import: privacy imports this module.
    from .privacy import toeplitz_hash

    messages = list(transcript)
    if not messages:
        raise TranscriptError("empty transcript")
    if any(isinstance(m, Abort) for m in messages):
        raise TranscriptError("session was aborted; no final key to replay")
    if not any(isinstance(m, SiftResult) for m in messages):
        raise TranscriptError("transcript truncated: no sift result")
    if not isinstance(messages[-1], PaSeed):
        raise TranscriptError("transcript truncated: does not end with privacy amplification")

    raw = np.asarray(raw_bits)
    key: np.ndarray | None = None
    for m in messages:
        if isinstance(m, SiftResult):
            idx = np.asarray(m.indices, dtype=np.int64)
            key = np.where(raw[idx] > 0, 1, 0).astype(np.uint8) if idx.size else np.zeros(0, np.uint8)
        elif isinstance(m, QberSample):
            key = np.delete(key, np.asarray(m.indices, dtype=np.int64))
        elif isinstance(m, ParityRound):
            for pos in m.corrections:
                key[pos] ^= 1
        elif isinstance(m, PaSeed):
            if m.input_length != key.size:
                raise TranscriptError(
                    f"privacy amplification expects {m.input_length} bits, replay has {key.size}"
                )
            key = toeplitz_hash(key, m.seed_bits(), m.output_length)
    return key
