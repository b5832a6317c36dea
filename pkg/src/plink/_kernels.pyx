# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Must match _kernels_fallback bit for bit."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t, uint64_t

cnp.import_array()

BACKEND = "cython"

cdef extern from *:
    """
    static inline int plink_popcountll(unsigned long long x) {
        return __builtin_popcountll(x);
    }
    """
    int plink_popcountll(unsigned long long x) nogil


def match_coincidences(a_ticks, b_ticks, offset, window):
    """Greedy nearest-neighbor pairing; see the fallback for the rule."""
    cdef cnp.ndarray[int64_t, ndim=1] a = np.ascontiguousarray(a_ticks, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] b = np.ascontiguousarray(b_ticks, dtype=np.int64)
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    if na == 0 or nb == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    cdef cnp.ndarray[int64_t, ndim=1] ai = np.empty(min(na, nb), dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] bi = np.empty(min(na, nb), dtype=np.int64)
    cdef cnp.ndarray[uint8_t, ndim=1] used = np.zeros(nb, dtype=np.uint8)
    cdef int64_t off = offset, win = window
    cdef Py_ssize_t i, j, lo = 0, best_j
    cdef int64_t target, d, best_d
    cdef Py_ssize_t npairs = 0
    for i in range(na):
        target = a[i] - off
        while lo < nb and b[lo] < target - win:
            lo += 1
        if lo >= nb:
            break
        best_j = -1
        best_d = win + 1
        j = lo
        while j < nb and b[j] <= target + win:
            if not used[j]:
                d = b[j] - target
                if d < 0:
                    d = -d
                if d < best_d:
                    best_d = d
                    best_j = j
            j += 1
        if best_j >= 0:
            used[best_j] = 1
            ai[npairs] = i
            bi[npairs] = best_j
            npairs += 1
    ai_out = ai[:npairs].copy()
    bi_out = bi[:npairs].copy()
    order = np.lexsort((bi_out, np.asarray(b)[bi_out]))
    return ai_out[order], bi_out[order]


def deadtime_filter(ticks, channels, dead_ticks):
    """Non-paralyzable per-channel dead time; returns a keep mask."""
    cdef cnp.ndarray[int64_t, ndim=1] t = np.ascontiguousarray(ticks, dtype=np.int64)
    cdef cnp.ndarray[uint8_t, ndim=1] ch = np.ascontiguousarray(channels, dtype=np.uint8)
    cdef Py_ssize_t n = t.shape[0]
    keep_arr = np.ones(n, dtype=bool)
    cdef cnp.ndarray[uint8_t, ndim=1] keep = keep_arr.view(np.uint8)
    cdef int64_t dead = dead_ticks
    if dead <= 0 or n == 0:
        return keep_arr
    cdef int64_t[256] last
    cdef int k
    for k in range(256):
        last[k] = 0
    cdef uint8_t[256] seen
    for k in range(256):
        seen[k] = 0
    cdef Py_ssize_t i
    cdef int c
    for i in range(n):
        c = ch[i]
        if seen[c] and t[i] - last[c] < dead:
            keep[i] = 0
        else:
            seen[c] = 1
            last[c] = t[i]
    return keep_arr


def delta_histogram(a_ticks, b_ticks, offset, half_span, bin_ticks):
    """Histogram of d = b - (a - offset) over |d| <= half_span."""
    cdef cnp.ndarray[int64_t, ndim=1] a = np.ascontiguousarray(a_ticks, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] b = np.ascontiguousarray(b_ticks, dtype=np.int64)
    cdef int64_t off = offset, half = half_span, width = bin_ticks
    cdef Py_ssize_t nbins = (2 * half) // width + 1
    cdef cnp.ndarray[int64_t, ndim=1] counts = np.zeros(nbins, dtype=np.int64)
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0]
    if na == 0 or nb == 0:
        return counts
    cdef Py_ssize_t i, j, lo = 0
    cdef int64_t target, d
    for i in range(na):
        target = a[i] - off
        while lo < nb and b[lo] < target - half:
            lo += 1
        if lo >= nb:
            break
        j = lo
        while j < nb and b[j] <= target + half:
            d = b[j] - target
            counts[(d + half) // width] += 1
            j += 1
    return counts


def toeplitz_hash(seed_bits, x_bits, m):
    """Word-packed GF(2) Toeplitz matrix-vector product.

    y[i] = parity(seed[i : i + n] AND reversed(x)), evaluated with 64-bit
    words and popcount; 64 pre-shifted copies of reversed(x) keep the inner
    loop aligned to the seed's word grid.
    """
    cdef cnp.ndarray[uint8_t, ndim=1] x = np.ascontiguousarray(x_bits, dtype=np.uint8)
    cdef cnp.ndarray[uint8_t, ndim=1] s = np.ascontiguousarray(seed_bits, dtype=np.uint8)
    cdef Py_ssize_t n = x.shape[0], mm = m
    if s.shape[0] != max(n + mm - 1, 0):
        raise ValueError(f"seed length {s.shape[0]} != n + m - 1 = {n + mm - 1}")
    if mm == 0:
        return np.zeros(0, dtype=np.uint8)
    if n == 0:
        return np.zeros(mm, dtype=np.uint8)

    # Pack the seed and the 64 shifted copies of reversed(x), LSB-first.
    cdef Py_ssize_t swords = (s.shape[0] + 63) // 64 + 1
    cdef cnp.ndarray[uint64_t, ndim=1] sw = np.zeros(swords, dtype=np.uint64)
    cdef Py_ssize_t i
    for i in range(s.shape[0]):
        if s[i]:
            sw[i >> 6] |= (<uint64_t>1) << (i & 63)
    # shifted[sh] holds reversed(x) advanced by sh bits, so word w of
    # shifted[sh] aligns with seed word (i >> 6) + w when sh = i & 63.
    cdef Py_ssize_t xwords = (n + 63) // 64 + 1
    cdef cnp.ndarray[uint64_t, ndim=2] shifted = np.zeros((64, xwords), dtype=np.uint64)
    cdef Py_ssize_t k, pos
    for k in range(n):
        # reversed(x)[k] = x[n - 1 - k]
        if x[n - 1 - k]:
            for i in range(64):
                pos = k + i
                shifted[i, pos >> 6] |= (<uint64_t>1) << (pos & 63)
    cdef cnp.ndarray[uint8_t, ndim=1] y = np.zeros(mm, dtype=np.uint8)
    cdef Py_ssize_t w0, nw, w, sh
    cdef uint64_t acc
    cdef int par
    nw = (n + 63) // 64 + 1
    for i in range(mm):
        w0 = i >> 6
        sh = i & 63
        par = 0
        for w in range(nw):
            if w0 + w < swords:
                acc = sw[w0 + w] & shifted[sh, w]
                par ^= plink_popcountll(acc) & 1
        y[i] = <uint8_t>par
    return y
