"""Timetag plumbing shared by the simulator and the timing analysis.

A tag is a detector channel (0=H, 1=V, 2=D, 3=A) plus a time in 125-ps
ticks. Streams keep parallel arrays sorted by (ticks, channel).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

TICK_PS = 125.0
CHANNEL_NAMES = ("H", "V", "D", "A")


class TimeTag(NamedTuple):
    channel: int
    ticks: int


@dataclass(frozen=True)
class TagStream:
    """Sorted detection stream: ticks ascending, ties by channel."""

    ticks: np.ndarray
    channels: np.ndarray

    def __post_init__(self):
        ticks = np.asarray(self.ticks, dtype=np.int64)
        channels = np.asarray(self.channels, dtype=np.uint8)
        if ticks.shape != channels.shape:
            raise ValueError("ticks and channels must have equal length")
        if channels.size and channels.max() > 3:
            raise ValueError("channel ids must be in 0..3")
        if ticks.size and ticks.min() < 0:
            raise ValueError("ticks must be non-negative")
        object.__setattr__(self, "ticks", ticks)
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return len(self.ticks)

    def __getitem__(self, i: int) -> TimeTag:
        return TimeTag(int(self.channels[i]), int(self.ticks[i]))

    def __iter__(self) -> Iterator[TimeTag]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_unsorted(cls, ticks: np.ndarray, channels: np.ndarray) -> "TagStream":
        ticks = np.asarray(ticks, dtype=np.int64)
        channels = np.asarray(channels, dtype=np.uint8)
        order = np.lexsort((channels, ticks))
        return cls(ticks[order], channels[order])

    def is_sorted(self) -> bool:
        if len(self) < 2:
            return True
        t, c = self.ticks, self.channels
        later = t[1:] > t[:-1]
        tied = (t[1:] == t[:-1]) & (c[1:] >= c[:-1])
        return bool(np.all(later | tied))
