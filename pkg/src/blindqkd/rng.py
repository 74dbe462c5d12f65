"""Per-session randomness split into independent, labelled Philox substreams.

Each consumer (Alice's bits, Bob's bases, detector noise, ...) draws from its
own stream, so switching one consumer on or off leaves every other stream
untouched.
"""

from __future__ import annotations

import zlib

import numpy as np


class UniformStream:
    """Scalar ``random()`` draws served from pre-generated blocks."""

    __slots__ = ("_gen", "_block", "_buf", "_pos")

    def __init__(self, generator: np.random.Generator, block: int = 4096):
        self._gen = generator
        self._block = block
        self._buf = generator.random(block).tolist()
        self._pos = 0

    def random(self) -> float:
        if self._pos == self._block:
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x


class RandomStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)

    def generator(self, label: str) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(label.encode()),))
        return np.random.Generator(np.random.Philox(seq))

    def stream(self, label: str) -> UniformStream:
        return UniformStream(self.generator(label))
