"""Pure-Python (numpy) implementations of the hot kernels.

Semantics here are the contract; the compiled extension in _kernels.pyx must
produce bit-identical results. Selection happens in plink.kernels.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

BACKEND = "python"


def match_coincidences(
    a_ticks: np.ndarray, b_ticks: np.ndarray, offset: int, window: int
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy nearest-neighbor pairing of two sorted tick streams.

    Alice's ticks are shifted by -offset, then scanned in time order; each
    tag grabs the nearest unconsumed Bob tag within +/-window ticks (ties go
    to the earlier Bob tag). Each tag is used at most once. Returns matched
    (alice_index, bob_index) arrays ordered by Bob time.

    Vectorized fast path: runs of Alice tags whose candidate windows do not
    overlap are resolved with array ops; contended runs fall back to an
    explicit scan, which is rare at physical rates.
    """
    a = np.asarray(a_ticks, dtype=np.int64)
    b = np.asarray(b_ticks, dtype=np.int64)
    if len(a) == 0 or len(b) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    shifted = a - np.int64(offset)
    lo = np.searchsorted(b, shifted - window, side="left")
    hi = np.searchsorted(b, shifted + window, side="right")
    has = hi > lo

    # An Alice tag is uncontended when its candidate range shares no Bob tag
    # with either neighbor's range.
    contended = np.zeros(len(a), dtype=bool)
    overlap_next = lo[1:] < hi[:-1]
    contended[:-1] |= overlap_next
    contended[1:] |= overlap_next

    ai_parts = []
    bi_parts = []

    solo = has & ~contended
    if solo.any():
        idx = np.flatnonzero(solo)
        # Nearest candidate: compare the insertion neighbors inside [lo, hi).
        ins = np.searchsorted(b, shifted[idx], side="left")
        left = np.clip(ins - 1, lo[idx], hi[idx] - 1)
        right = np.clip(ins, lo[idx], hi[idx] - 1)
        dl = np.abs(b[left] - shifted[idx])
        dr = np.abs(b[right] - shifted[idx])
        pick = np.where(dl <= dr, left, right)  # tie -> earlier Bob tag
        ai_parts.append(idx)
        bi_parts.append(pick)

    todo = has & contended
    if todo.any():
        consumed = set()
        ai_list = []
        bi_list = []
        for i in np.flatnonzero(todo):
            best_j = -1
            best_d = window + 1
            for j in range(lo[i], hi[i]):
                if j in consumed:
                    continue
                d = abs(int(b[j]) - int(shifted[i]))
                if d < best_d:
                    best_d = d
                    best_j = j
            if best_j >= 0:
                consumed.add(best_j)
                ai_list.append(i)
                bi_list.append(best_j)
        ai_parts.append(np.array(ai_list, dtype=np.int64))
        bi_parts.append(np.array(bi_list, dtype=np.int64))

    if not ai_parts:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    ai = np.concatenate(ai_parts)
    bi = np.concatenate(bi_parts)
    order = np.lexsort((bi, b[bi]))
    return ai[order].astype(np.int64), bi[order].astype(np.int64)


def deadtime_filter(ticks: np.ndarray, channels: np.ndarray, dead_ticks: int) -> np.ndarray:
    """Non-paralyzable dead time: keep a tag iff it lands >= dead_ticks after
    the previously *kept* tag on the same channel. Returns a boolean mask.

    Tags whose gap to their raw predecessor is already >= dead_ticks are kept
    unconditionally (the previous kept tag can only be earlier), which splits
    each channel into short runs; only multi-tag runs need the sequential
    scan.
    """
    ticks = np.asarray(ticks, dtype=np.int64)
    channels = np.asarray(channels)
    keep = np.ones(len(ticks), dtype=bool)
    if dead_ticks <= 0 or len(ticks) == 0:
        return keep
    for ch in np.unique(channels):
        sel = np.flatnonzero(channels == ch)
        t = ticks[sel]
        gaps = np.diff(t)
        anchors = np.concatenate([[0], np.flatnonzero(gaps >= dead_ticks) + 1])
        bounds = np.concatenate([anchors, [len(t)]])
        k = np.ones(len(t), dtype=bool)
        for s, e in zip(bounds[:-1], bounds[1:]):
            if e - s == 1:
                continue
            last = t[s]
            for i in range(s + 1, e):
                if t[i] - last >= dead_ticks:
                    last = t[i]
                else:
                    k[i] = False
        keep[sel] = k
    return keep


def delta_histogram(
    a_ticks: np.ndarray,
    b_ticks: np.ndarray,
    offset: int,
    half_span: int,
    bin_ticks: int,
) -> np.ndarray:
    """Histogram of d = b - (a - offset) over |d| <= half_span.

    Counts every (a, b) pair in range, not just greedy matches. Bin k covers
    d in [-half_span + k*bin_ticks, -half_span + (k+1)*bin_ticks).
    """
    a = np.asarray(a_ticks, dtype=np.int64)
    b = np.asarray(b_ticks, dtype=np.int64)
    nbins = (2 * half_span) // bin_ticks + 1
    if len(a) == 0 or len(b) == 0:
        return np.zeros(nbins, dtype=np.int64)
    shifted = a - np.int64(offset)
    lo = np.searchsorted(b, shifted - half_span, side="left")
    hi = np.searchsorted(b, shifted + half_span, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return np.zeros(nbins, dtype=np.int64)
    # Flatten the variable-length [lo, hi) ranges into one index vector.
    rep = np.repeat(np.arange(len(a)), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    flat = np.arange(total) - np.repeat(starts, counts) + np.repeat(lo, counts)
    deltas = b[flat] - shifted[rep]
    inside = np.abs(deltas) <= half_span
    bins = (deltas[inside] + half_span) // bin_ticks
    return np.bincount(bins, minlength=nbins).astype(np.int64)


def toeplitz_hash(seed_bits: np.ndarray, x_bits: np.ndarray, m: int) -> np.ndarray:
    """GF(2) Toeplitz matrix-vector product.

    y[i] = XOR_j seed[i - j + n - 1] * x[j] for i < m, with the seed holding
    the first row and first column (length n + m - 1). Computed exactly via
    an integer FFT convolution reduced mod 2.
    """
    x = np.asarray(x_bits, dtype=np.uint8)
    s = np.asarray(seed_bits, dtype=np.uint8)
    n = len(x)
    if len(s) != max(n + m - 1, 0):
        raise ValueError(f"seed length {len(s)} != n + m - 1 = {n + m - 1}")
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    if n == 0:
        return np.zeros(m, dtype=np.uint8)
    if n * m <= 1 << 14:
        conv = np.convolve(s.astype(np.int64), x.astype(np.int64))
    else:
        conv = np.rint(fftconvolve(s.astype(np.float64), x.astype(np.float64))).astype(np.int64)
    return (conv[n - 1 : n - 1 + m] & 1).astype(np.uint8)
