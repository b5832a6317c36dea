"""Secure-key-length bound and Toeplitz privacy amplification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass(frozen=True)
class PaSeed:
    """Random bits defining a Toeplitz matrix (first row + first column)."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=np.uint8))

    @classmethod
    def generate(cls, n: int, m: int, rng: np.random.Generator) -> "PaSeed":
        return cls(rng.integers(0, 2, size=max(n + m - 1, 0), dtype=np.uint8))


@dataclass(frozen=True)
class SecretBlock:
    block_id: int
    key_bits: np.ndarray
    qber_used: float
    leaked_bits_used: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("key length must be >= 0")
        object.__setattr__(self, "key_bits", np.asarray(self.key_bits, dtype=np.uint8))


def h2(x: float) -> float:
    """Binary entropy in bits; h2(0) = h2(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"probability {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def secure_length(n: int, qber: float, leaked_bits: int, margin_bits: int = 64) -> int:
    """Asymptotic secret length: floor(n(1 - h2(Q)) - leak - margin), >= 0."""
    if n <= 0:
        raise ValueError(f"sifted length {n} must be > 0")
    if not 0.0 <= qber <= 0.5:
        raise ValueError(f"qber {qber} outside [0, 0.5]")
    m = math.floor(n * (1.0 - h2(qber)) - leaked_bits - margin_bits)
    return max(0, m)


def toeplitz_hash(bits: np.ndarray, seed: PaSeed, m: int) -> np.ndarray:
    """Compress n bits to m with the Toeplitz matrix T[i, j] = seed[i - j + n - 1].

    Dispatches to the word-packed kernel; tests hold it to the bit-by-bit
    definition exactly.
    """
    x = np.asarray(bits, dtype=np.uint8)
    if len(seed.bits) != max(len(x) + m - 1, 0):
        raise ValueError(
            f"seed length {len(seed.bits)} != n + m - 1 = {len(x) + m - 1}"
        )
    return kernels.toeplitz_hash(seed.bits, x, m)
