"""Interactive parity-exchange error correction (two-pass CASCADE) with a verification tag.

Bob holds the noisy key and asks Alice for parities; Alice's key is only
touched through :func:`_parity` calls that are each counted as one disclosed
bit.  Pass 0 uses contiguous blocks, pass 1 a permutation whose seed is
published, so the whole exchange is reproducible from the transcript.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transcript import Abort, ParityRound, Transcript, Verification, pack_bits

DEFAULT_ABORT_QBER = 0.11
DEFAULT_TAG_BITS = 64


class ReconciliationError(RuntimeError):
    pass


class QberAbort(ReconciliationError):
    def __init__(self, qber: float, threshold: float):
        super().__init__(f"QBER {qber:.4f} at or above abort threshold {threshold:.4f}")
        self.qber = qber
        self.threshold = threshold


@dataclass
class ReconciliationResult:
    key: np.ndarray
    disclosed_bits: int
    corrections: list[int] = field(default_factory=list)
    verified: bool = True


def default_block_sizes(qber: float, n: int) -> tuple[int, int]:
    if n == 0:
        return (1, 1)
    k1 = n if qber <= 0 else max(4, int(round(0.4 / qber)))
    k1 = min(k1, n)
    return (k1, min(2 * k1, n))


def _parity(bits: list[int], positions) -> int:
    p = 0
    for i in positions:
        p ^= bits[i]
    return p


def verification_tag(key: np.ndarray, seed: int, tag_bits: int) -> np.ndarray:
    """Parities of ``tag_bits`` random subsets; two different keys collide with probability 2**-tag_bits."""
    if key.size == 0 or tag_bits == 0:
        return np.zeros(tag_bits, dtype=np.uint8)
    masks = np.random.default_rng(seed).integers(0, 2, size=(tag_bits, key.size), dtype=np.uint8)
    return ((masks.astype(np.int64) @ key.astype(np.int64)) & 1).astype(np.uint8)


def error_correct(
    alice_key: np.ndarray,
    bob_key: np.ndarray,
    transcript: Transcript,
    *,
    qber: float,
    rng: np.random.Generator,
    block_sizes: tuple[int, ...] | None = None,
    abort_threshold: float = DEFAULT_ABORT_QBER,
    tag_bits: int = DEFAULT_TAG_BITS,
) -> ReconciliationResult:
    if len(alice_key) != len(bob_key):
        raise ReconciliationError("keys differ in length")
    if qber >= abort_threshold:
        transcript.append(Abort(reason=f"qber {qber:.6f} >= {abort_threshold}"))
        raise QberAbort(qber, abort_threshold)

    n = len(bob_key)
    alice = [int(b) for b in alice_key]
    bob = [int(b) for b in bob_key]
    if block_sizes is None:
        block_sizes = default_block_sizes(qber, n)

    disclosed = 0
    all_corrections: list[int] = []
    # Per processed pass: list of blocks, position -> block map, Alice's block parities.
    passes: list[tuple[list[list[int]], np.ndarray, list[int]]] = []

    for pass_index, k in enumerate(block_sizes if n else ()):
        if k < 1:
            raise ReconciliationError(f"block size must be >= 1, got {k}")
        seed = None
        if pass_index == 0:
            order = np.arange(n)
        else:
            seed = int(rng.integers(0, 2**63 - 1))
            order = np.random.default_rng(seed).permutation(n)
        blocks = [order[i : i + k].tolist() for i in range(0, n, k)]
        where = np.empty(n, dtype=np.int64)
        for bi, block in enumerate(blocks):
            where[block] = bi
        alice_parities = [_parity(alice, b) for b in blocks]
        disclosed += len(blocks)
        passes.append((blocks, where, alice_parities))

        search: list[int] = []
        corrections: list[int] = []
        queue = [(pass_index, bi) for bi, b in enumerate(blocks) if alice_parities[bi] != _parity(bob, b)]
        while queue:
            p, bi = queue.pop()
            p_blocks, _, p_parities = passes[p]
            block = p_blocks[bi]
            if _parity(bob, block) == p_parities[bi]:
                continue
            # Binary search for one error inside a block with odd error count.
            span = block
            while len(span) > 1:
                half = span[: len(span) // 2]
                a = _parity(alice, half)
                search.append(a)
                disclosed += 1
                span = half if a != _parity(bob, half) else span[len(span) // 2 :]
            pos = span[0]
            bob[pos] ^= 1
            corrections.append(pos)
            for q, (q_blocks, q_where, q_parities) in enumerate(passes):
                if q == p:
                    continue
                qb = int(q_where[pos])
                if _parity(bob, q_blocks[qb]) != q_parities[qb]:
                    queue.append((q, qb))
        all_corrections.extend(corrections)
        transcript.append(
            ParityRound(
                pass_index=pass_index,
                block_size=int(k),
                permutation_seed=seed,
                block_parities=tuple(alice_parities),
                search_parities=tuple(search),
                corrections=tuple(corrections),
            )
        )

    corrected = np.asarray(bob, dtype=np.uint8)
    tag_seed = int(rng.integers(0, 2**63 - 1))
    alice_tag = verification_tag(np.asarray(alice, dtype=np.uint8), tag_seed, tag_bits)
    ok = bool(np.array_equal(alice_tag, verification_tag(corrected, tag_seed, tag_bits)))
    disclosed += tag_bits
    transcript.append(Verification(seed=tag_seed, tag_bits=tag_bits, tag=pack_bits(alice_tag), ok=ok))
    return ReconciliationResult(corrected, disclosed, all_corrections, ok)
