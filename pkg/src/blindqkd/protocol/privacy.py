"""Privacy amplification with a binary Toeplitz hash."""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .transcript import PaSeed, Transcript, pack_bits


class PrivacyAmplificationError(ValueError):
    pass


def seed_length(input_length: int, output_length: int) -> int:
    return input_length + output_length - 1 if output_length > 0 else 0


def identity_seed(n: int) -> np.ndarray:
    """Seed whose square Toeplitz matrix is the identity."""
    seed = np.zeros(2 * n - 1, dtype=np.uint8)
    seed[n - 1] = 1
    return seed


def toeplitz_hash(key: np.ndarray, seed: np.ndarray, output_length: int) -> np.ndarray:
    """Multiply ``key`` by the ``output_length x len(key)`` Toeplitz matrix over GF(2).

    The matrix entry ``T[i, j]`` is ``seed[i - j + n - 1]``, so the first
    row is the first ``n`` seed bits reversed and the first column is
    ``seed[n - 1:]``.  The product is the middle of the full convolution of
    seed and key.
    """
    key = np.asarray(key, dtype=np.uint8)
    seed = np.asarray(seed, dtype=np.uint8)
    n = key.size
    if output_length < 0 or output_length > n:
        raise PrivacyAmplificationError(f"output length {output_length} outside [0, {n}]")
    if output_length == 0:
        return np.zeros(0, dtype=np.uint8)
    if seed.size != seed_length(n, output_length):
        raise PrivacyAmplificationError(
            f"seed must have {seed_length(n, output_length)} bits, got {seed.size}"
        )
    # Sums stay far below 2**53 so rounding the FFT result is exact.
    full = np.rint(fftconvolve(seed.astype(np.float64), key.astype(np.float64))).astype(np.int64)
    return (full[n - 1 : n - 1 + output_length] & 1).astype(np.uint8)


def output_length(corrected_length: int, disclosed_bits: int, margin_bits: int = 64) -> int:
    """Final key length: corrected length minus reconciliation leakage and a fixed margin."""
    return max(0, corrected_length - disclosed_bits - margin_bits)


def privacy_amplify(key: np.ndarray, seed: np.ndarray, out_len: int, transcript: Transcript) -> np.ndarray:
    key = np.asarray(key, dtype=np.uint8)
    if out_len > key.size:
        raise PrivacyAmplificationError(f"cannot extract {out_len} bits from a {key.size}-bit key")
    final = toeplitz_hash(key, seed, out_len)
    transcript.append(
        PaSeed(seed=pack_bits(seed), seed_length=int(np.asarray(seed).size),
               input_length=int(key.size), output_length=int(out_len))
    )
    return final


def random_seed(rng: np.random.Generator, input_length: int, out_len: int) -> np.ndarray:
    return rng.integers(0, 2, size=seed_length(input_length, out_len), dtype=np.uint8)
