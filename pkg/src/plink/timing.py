"""Clock-offset recovery, coincidence identification, window optimization.

The offset between the two timestamping clocks is found in two stages:
a coarse histogram cross-correlation (FFT) over the search span locates the
peak, then a one-tick-resolution scan around it returns the peak centroid.
Coincidences are matched with a greedy nearest-neighbor sweep whose rule is
pinned down exactly (the test oracle replays it quadratically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from . import kernels
from .privamp import h2
from .tags import TICK_PS, TagStream, TimeTag

# Bonferroni-corrected tail probability for calling a correlation peak real.
PEAK_ALPHA = 1e-4
CENTROID_HALF_TICKS = 64


class SyncError(RuntimeError):
    """No significant correlation peak: the streams share no pair signal."""


@dataclass(frozen=True)
class ClockModel:
    """Alice's clock relative to Bob's: fixed offset plus linear rate error."""

    offset_ticks: int = 0
    drift_ppm: float = 0.0

    def __post_init__(self):
        if abs(self.drift_ppm) >= 100.0:
            raise ValueError(f"|drift| {self.drift_ppm} ppm exceeds the rubidium bound")

    def apply_ps(self, times_ps: np.ndarray) -> np.ndarray:
        return times_ps * (1.0 + self.drift_ppm * 1e-6) + self.offset_ticks * TICK_PS


@dataclass(frozen=True)
class CoincidencePair:
    a_tag: TimeTag
    b_tag: TimeTag
    delta_ticks: int


@dataclass(frozen=True)
class CoincidenceSet:
    """Matched pairs as parallel arrays; iterates as CoincidencePair views."""

    a_ticks: np.ndarray
    a_channels: np.ndarray
    b_ticks: np.ndarray
    b_channels: np.ndarray
    a_indices: np.ndarray
    b_indices: np.ndarray

    @property
    def delta_ticks(self) -> np.ndarray:
        return self.a_ticks - self.b_ticks

    def __len__(self) -> int:
        return len(self.a_ticks)

    def __getitem__(self, i: int):
        return CoincidencePair(
            TimeTag(int(self.a_channels[i]), int(self.a_ticks[i])),
            TimeTag(int(self.b_channels[i]), int(self.b_ticks[i])),
            int(self.a_ticks[i] - self.b_ticks[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class CorrelationHistogram:
    """Counts of b - (a - offset) deltas; bin k starts at origin + k*width."""

    bin_width_ticks: int
    origin_ticks: int
    counts: np.ndarray

    def bin_start_ps(self) -> np.ndarray:
        return (self.origin_ticks + np.arange(len(self.counts)) * self.bin_width_ticks) * TICK_PS


@dataclass(frozen=True)
class WindowChoice:
    window_ticks: int
    proxy: float
    warning: bool


def _peak_is_significant(peak: float, mean: float, nlags: int) -> bool:
    """Poisson tail test with a Bonferroni correction over the scanned lags.

    In the dense regime this sits at mean + ~5*sqrt(mean); for sparse
    histograms it demands the correspondingly larger integer excess.
    """
    if peak <= mean:
        return False
    return float(poisson.sf(peak - 1, mean)) * nlags < PEAK_ALPHA


def estimate_offset(
    tags_a: TagStream,
    tags_b: TagStream,
    search_span_ticks: int,
    coarse_bin_ticks: int,
    slice_ticks: int | None = None,
) -> int:
    """Recover Alice-minus-Bob clock offset from the pair correlation peak.

    ``slice_ticks`` bounds how much of the streams is fed to the coarse
    stage (None = everything); the fine stage always refines on the slice.
    Raises SyncError when no significant peak exists in the span.
    """
    a = tags_a.ticks
    b = tags_b.ticks
    if len(a) == 0 or len(b) == 0:
        raise SyncError("empty tag stream")
    if slice_ticks is not None:
        b_lo = b[0]
        b = b[b <= b_lo + slice_ticks]
        a = a[(a >= b_lo - search_span_ticks) & (a <= b_lo + slice_ticks + search_span_ticks)]
        if len(a) == 0:
            raise SyncError("no Alice tags within the search span of the slice")

    span_bins = int(search_span_ticks // coarse_bin_ticks) + 1
    origin = min(int(a[0]), int(b[0])) - span_bins * coarse_bin_ticks
    ia = (a - origin) // coarse_bin_ticks
    ib = (b - origin) // coarse_bin_ticks
    nbins = int(max(ia[-1], ib[-1])) + 1
    length = int(2 ** math.ceil(math.log2(nbins + span_bins + 1)))
    ca = np.bincount(ia, minlength=nbins).astype(np.float32)
    cb = np.bincount(ib, minlength=nbins).astype(np.float32)
    corr = np.fft.irfft(np.fft.rfft(ca, length) * np.conj(np.fft.rfft(cb, length)), length)

    lags = np.arange(-span_bins, span_bins + 1)
    vals = corr[lags % length]
    peak_at = int(np.argmax(vals))
    peak = float(vals[peak_at])
    mean = float(np.maximum(vals, 0.0).mean())
    if not _peak_is_significant(peak, mean, len(vals)):
        raise SyncError(
            f"no significant correlation peak (max {peak:.1f}, mean {mean:.1f})"
        )
    coarse_offset = int(lags[peak_at]) * coarse_bin_ticks

    half = 2 * coarse_bin_ticks
    hist = kernels.delta_histogram(a, b, coarse_offset, half, 1)
    p = int(np.argmax(hist))
    background = float(np.median(hist))
    lo = max(0, p - CENTROID_HALF_TICKS)
    hi = min(len(hist), p + CENTROID_HALF_TICKS + 1)
    weights = np.maximum(hist[lo:hi] - background, 0.0)
    if weights.sum() <= 0:
        raise SyncError("fine correlation peak vanished")
    deltas = np.arange(lo, hi) - half
    centroid = float(np.dot(weights, deltas) / weights.sum())
    return coarse_offset - int(round(centroid))


def find_coincidences(
    tags_a: TagStream, tags_b: TagStream, offset_ticks: int, window_ticks: int
) -> CoincidenceSet:
    """Pair tags with |t_b - (t_a - offset)| <= window.

    Greedy rule, applied to Alice tags in time order: match the nearest
    unconsumed Bob tag in the window (ties to the earlier Bob tag); each tag
    is used at most once. Output is ordered by Bob time.
    """
    ai, bi = kernels.match_coincidences(
        tags_a.ticks, tags_b.ticks, int(offset_ticks), int(window_ticks)
    )
    return CoincidenceSet(
        a_ticks=tags_a.ticks[ai],
        a_channels=tags_a.channels[ai],
        b_ticks=tags_b.ticks[bi],
        b_channels=tags_b.channels[bi],
        a_indices=ai,
        b_indices=bi,
    )


def build_histogram(
    tags_a: TagStream,
    tags_b: TagStream,
    offset_ticks: int,
    half_span_ticks: int,
    bin_width_ticks: int = 1,
) -> CorrelationHistogram:
    counts = kernels.delta_histogram(
        tags_a.ticks, tags_b.ticks, int(offset_ticks), int(half_span_ticks), int(bin_width_ticks)
    )
    return CorrelationHistogram(
        bin_width_ticks=int(bin_width_ticks),
        origin_ticks=-int(half_span_ticks),
        counts=counts,
    )


def optimize_window(
    tags_a: TagStream,
    tags_b: TagStream,
    offset_ticks: int,
    candidate_windows: list[int],
) -> WindowChoice:
    """Pick the window maximizing C(w) * (1 - 2 h2(Qhat(w))).

    Qhat(w) is the accidental half-fraction with the accidental density read
    off side-lobe bins far from the peak. Ties break toward the smaller
    window; if every candidate scores <= 0 the smallest is returned with the
    warning flag set.
    """
    if not candidate_windows:
        raise ValueError("no candidate windows")
    cands = sorted(int(w) for w in candidate_windows)
    wmax = cands[-1]
    sidelobe_start = max(16 * wmax, 512)
    half_span = sidelobe_start + 512
    hist = kernels.delta_histogram(tags_a.ticks, tags_b.ticks, int(offset_ticks), half_span, 1)
    deltas = np.arange(-half_span, half_span + 1)
    lobe = np.abs(deltas) >= sidelobe_start
    density = float(hist[lobe].mean())

    best: WindowChoice | None = None
    for w in cands:
        c = float(hist[np.abs(deltas) <= w].sum())
        if c <= 0:
            continue
        qhat = min(0.5, 0.5 * density * (2 * w + 1) / c)
        proxy = c * (1.0 - 2.0 * h2(qhat))
        if proxy > 0 and (best is None or proxy > best.proxy):
            best = WindowChoice(window_ticks=w, proxy=proxy, warning=False)
    if best is None:
        return WindowChoice(window_ticks=cands[0], proxy=0.0, warning=True)
    return best


def peak_fwhm(hist: CorrelationHistogram) -> float:
    """Full width at half maximum above the median background, in ps.

    Linear interpolation between bin centers on both flanks. Raises
    ValueError when the histogram has no significant peak.
    """
    counts = np.asarray(hist.counts, dtype=np.float64)
    if len(counts) < 3:
        raise ValueError("histogram too short for a peak")
    background = float(np.median(counts))
    p = int(np.argmax(counts))
    peak = float(counts[p])
    if peak < background + max(5.0 * math.sqrt(max(background, 0.0)), 1.0):
        raise ValueError("no peak above background")
    half = background + 0.5 * (peak - background)

    def cross(direction: int) -> float:
        i = p
        while 0 <= i + direction < len(counts) and counts[i + direction] >= half:
            i += direction
        j = i + direction
        if j < 0 or j >= len(counts):
            return float(i)  # peak runs into the edge; width is clipped
        frac = (counts[i] - half) / (counts[i] - counts[j])
        return i + direction * frac

    width_bins = cross(+1) - cross(-1)
    return width_bins * hist.bin_width_ticks * TICK_PS
