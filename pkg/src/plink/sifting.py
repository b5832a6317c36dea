"""BBM92 decoding and basis sifting.

Channel-to-bit convention (fixed protocol-wide): channel 0 = H -> (HV, 0),
1 = V -> (HV, 1), 2 = D -> (DA, 0), 3 = A -> (DA, 1). The basis-reveal
transcript carries basis identifiers only; bits never leave a node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qstate import Basis
from .tags import TimeTag
from .timing import CoincidenceSet

_BASIS_BY_CHANNEL = (Basis.HV, Basis.HV, Basis.DA, Basis.DA)


@dataclass(frozen=True)
class RawDetection:
    basis: Basis
    bit: int
    ticks: int


@dataclass(frozen=True)
class SiftedBlock:
    """One side's sifted key material for a block."""

    block_id: int
    bits: np.ndarray
    pair_indices: np.ndarray  # indices into the block's coincidence list
    basis_match_count: int
    start_ticks: int
    duration_ticks: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if len(bits) != self.basis_match_count:
            raise ValueError("bit count must equal the basis-match count")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "pair_indices", np.asarray(self.pair_indices, dtype=np.int64))


@dataclass(frozen=True)
class BasisRevealTranscript:
    """What actually crosses the classical channel during sifting."""

    block_id: int
    alice_bases: np.ndarray  # 0 = HV, 1 = DA, one entry per coincidence
    bob_bases: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alice_bases", np.asarray(self.alice_bases, dtype=np.uint8))
        object.__setattr__(self, "bob_bases", np.asarray(self.bob_bases, dtype=np.uint8))


def decode(tag: TimeTag) -> RawDetection:
    """Map a detector channel to its basis and bit."""
    if not 0 <= tag.channel <= 3:
        raise ValueError(f"invalid channel {tag.channel}")
    return RawDetection(
        basis=_BASIS_BY_CHANNEL[tag.channel], bit=tag.channel & 1, ticks=tag.ticks
    )


def channel_basis_bits(channels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decode: (basis ids, bits) for an array of channels."""
    channels = np.asarray(channels, dtype=np.uint8)
    if channels.size and channels.max() > 3:
        raise ValueError("invalid channel id in stream")
    return (channels >> 1).astype(np.uint8), (channels & 1).astype(np.uint8)


def sift(
    pairs: CoincidenceSet, block_id: int = 0, start_ticks: int = 0, duration_ticks: int = 0
) -> tuple[SiftedBlock, SiftedBlock, BasisRevealTranscript]:
    """Keep equal-basis coincidences; bits stay local, bases go on the wire."""
    basis_a, bits_a = channel_basis_bits(pairs.a_channels)
    basis_b, bits_b = channel_basis_bits(pairs.b_channels)
    transcript = BasisRevealTranscript(block_id=block_id, alice_bases=basis_a, bob_bases=basis_b)
    kept = np.flatnonzero(basis_a == basis_b)
    make = lambda bits: SiftedBlock(
        block_id=block_id,
        bits=bits[kept],
        pair_indices=kept,
        basis_match_count=len(kept),
        start_ticks=start_ticks,
        duration_ticks=duration_ticks,
    )
    return make(bits_a), make(bits_b), transcript


def sift_local(own_bases: np.ndarray, peer_bases: np.ndarray) -> np.ndarray:
    """Indices a node keeps given its own and the revealed peer bases."""
    own_bases = np.asarray(own_bases, dtype=np.uint8)
    peer_bases = np.asarray(peer_bases, dtype=np.uint8)
    if own_bases.shape != peer_bases.shape:
        raise ValueError("basis arrays must have equal length")
    return np.flatnonzero(own_bases == peer_bases)


def measured_qber(sifted_a: np.ndarray, sifted_b: np.ndarray) -> float:
    """Hamming distance over length; a test-side oracle, not protocol flow."""
    a = np.asarray(sifted_a, dtype=np.uint8)
    b = np.asarray(sifted_b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if len(a) == 0:
        raise ValueError("empty sifted strings")
    return float(np.count_nonzero(a != b) / len(a))
