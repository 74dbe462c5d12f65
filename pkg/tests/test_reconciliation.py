import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindqkd.protocol import (
    Abort,
    ParityRound,
    QberAbort,
    ReconciliationError,
    Transcript,
    Verification,
    default_block_sizes,
    error_correct,
    verification_tag,
)


def locate_single_error(alice, bob):
    """Independent oracle: halve the key on parity mismatch until one bit remains."""
    lo, hi = 0, len(alice)
    asked = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        asked += 1
        if alice[lo:mid].sum() % 2 != bob[lo:mid].sum() % 2:
            hi = mid
        else:
            lo = mid
    return lo, asked


def test_single_flip_found_by_binary_search():
    rng = np.random.default_rng(11)
    alice = rng.integers(0, 2, 1024).astype(np.uint8)
    bob = alice.copy()
    bob[613] ^= 1
    pos, asked = locate_single_error(alice, bob)
    assert (pos, asked) == (613, 10)

    t = Transcript()
    res = error_correct(alice, bob, t, qber=1 / 1024, rng=np.random.default_rng(0), block_sizes=(1024,))
    assert res.corrections == [613]
    assert np.array_equal(res.key, alice)
    first = t.of_kind(ParityRound)[0]
    assert len(first.search_parities) == asked
    assert res.disclosed_bits == 1 + asked + 64
    assert res.verified


def test_equal_keys_need_no_corrections():
    key = np.random.default_rng(2).integers(0, 2, 500).astype(np.uint8)
    t = Transcript()
    res = error_correct(key, key.copy(), t, qber=0.0, rng=np.random.default_rng(0))
    assert res.corrections == [] and res.verified
    assert np.array_equal(res.key, key)


def test_high_qber_aborts():
    key = np.zeros(100, np.uint8)
    t = Transcript()
    with pytest.raises(QberAbort):
        error_correct(key, key, t, qber=0.2, rng=np.random.default_rng(0))
    assert isinstance(t[-1], Abort)


def test_length_mismatch():
    with pytest.raises(ReconciliationError):
        error_correct(np.zeros(3, np.uint8), np.zeros(4, np.uint8), Transcript(), qber=0.0,
                      rng=np.random.default_rng(0))


def test_default_block_sizes():
    assert default_block_sizes(0.0, 1000) == (1000, 1000)
    assert default_block_sizes(0.01, 10_000) == (40, 80)
    assert default_block_sizes(0.5, 10) == (4, 8)


def test_verification_tag_detects_difference():
    a = np.zeros(256, np.uint8)
    b = a.copy()
    b[17] = 1
    assert not np.array_equal(verification_tag(a, 5, 64), verification_tag(b, 5, 64))
    assert np.array_equal(verification_tag(b, 5, 64), verification_tag(b.copy(), 5, 64))


@settings(max_examples=40, deadline=None)
@given(st.integers(64, 2000), st.floats(0.0, 0.06), st.integers(0, 2**32 - 1))
def test_corrected_keys_agree_or_verification_fails(n, q, seed):
    rng = np.random.default_rng(seed)
    alice = rng.integers(0, 2, n).astype(np.uint8)
    bob = alice ^ (rng.random(n) < q).astype(np.uint8)
    t = Transcript()
    res = error_correct(alice, bob, t, qber=max(q, 1e-3), rng=rng)
    assert res.verified == t.of_kind(Verification)[-1].ok
    if res.verified:
        assert np.array_equal(res.key, alice)
    # Replaying the published corrections on Bob's key reproduces his output.
    replayed = bob.copy()
    for r in t.of_kind(ParityRound):
        for pos in r.corrections:
            replayed[pos] ^= 1
    assert np.array_equal(replayed, res.key)


def test_typical_qber_corrects_fully():
    rng = np.random.default_rng(4)
    ok = 0
    for _ in range(20):
        alice = rng.integers(0, 2, 4000).astype(np.uint8)
        bob = alice ^ (rng.random(4000) < 0.03).astype(np.uint8)
        res = error_correct(alice, bob, Transcript(), qber=0.03, rng=rng)
        ok += res.verified and np.array_equal(res.key, alice)
    # two passes leave residual even-error blocks now and then; the tag flags them
    assert ok >= 17
