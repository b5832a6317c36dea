"""Timetag stream synthesis for one acquisition block.

Events are sampled from the thinned marked-Poisson decomposition of the
source: pairs where both arms survive, pairs where only one arm survives,
and dark counts are independent Poisson processes whose joint statistics are
identical to drawing every generated pair and thinning it per arm. This is
what makes 25-s blocks at multi-MHz generated pair rates tractable.

Alice's arm carries the deployed fiber (loss, propagation delay) and her
clock offset; Bob's arm is local. Polarization outcomes are drawn from the
effective two-qubit state after the compensator and fiber rotation act on
Alice's photon.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .channel import FiberConfig, LcvrStack, lcvr_unitary, propagation_delay
from .qstate import (
    Basis,
    PolarizationUnitary,
    Side,
    TwoQubitPolarizationState,
    apply_local,
    outcome_probs,
    werner,
)
from .tags import TICK_PS, TagStream, TimeTag
from .timing import ClockModel

__all__ = [
    "TimeTag",
    "TagStream",
    "SourceConfig",
    "DetectorConfig",
    "SimBlock",
    "generate_block",
    "rate_expectations",
    "db_to_fraction",
]


def db_to_fraction(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SourceConfig:
    generated_pair_rate_hz: float
    visibility: float = 0.98
    state: Optional[TwoQubitPolarizationState] = None

    def __post_init__(self):
        if self.generated_pair_rate_hz < 0:
            raise ValueError("pair rate must be >= 0")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility {self.visibility} outside [0, 1]")

    def emitted_state(self) -> TwoQubitPolarizationState:
        return self.state if self.state is not None else werner(self.visibility)


@dataclass(frozen=True)
class DetectorConfig:
    """One analyzer arm: 4 detectors behind a 50/50 basis-choice splitter.

    ``efficiency`` is the whole-arm collection-times-detection efficiency
    (coupling optics folded in); ``dark_rate_hz`` is per detector.
    """

    efficiency: float
    dark_rate_hz: float = 0.0
    jitter_sigma_ps: float = 0.0
    dead_time_ns: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency {self.efficiency} outside [0, 1]")
        if self.dark_rate_hz < 0 or self.jitter_sigma_ps < 0 or self.dead_time_ns < 0:
            raise ValueError("detector rates and times must be >= 0")


@dataclass(frozen=True)
class SimBlock:
    """Per-block streams plus ground truth for tests and calibration."""

    alice_tags: TagStream
    bob_tags: TagStream
    truth: np.ndarray  # (n, 2) indices of genuine pairs into the two streams
    params: dict = field(repr=False)

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=np.int64).reshape(-1, 2)
        if len(truth):
            if truth[:, 0].max() >= len(self.alice_tags) or truth[:, 1].max() >= len(self.bob_tags):
                raise ValueError("truth indices out of range")
        object.__setattr__(self, "truth", truth)


def side_transmission(fiber: FiberConfig, det: DetectorConfig, side: Side) -> float:
    """Total arm transmission: channel loss (Alice only) times arm efficiency."""
    loss = db_to_fraction(fiber.loss_db) if side is Side.ALICE else 1.0
    return loss * det.efficiency


def rate_expectations(
    source: SourceConfig,
    fiber: FiberConfig,
    det_a: DetectorConfig,
    det_b: DetectorConfig,
    window_ns: float,
) -> dict:
    """Closed-form rates in 1/s: singles per side, true and accidental pairs."""
    r = source.generated_pair_rate_hz
    t_a = side_transmission(fiber, det_a, Side.ALICE)
    t_b = side_transmission(fiber, det_b, Side.BOB)
    singles_a = r * t_a + 4.0 * det_a.dark_rate_hz
    singles_b = r * t_b + 4.0 * det_b.dark_rate_hz
    return {
        "singles_a": singles_a,
        "singles_b": singles_b,
        "coincidences": r * t_a * t_b,
        "accidentals": singles_a * singles_b * window_ns * 1e-9,
    }


def _joint_channel_probs(state: TwoQubitPolarizationState) -> np.ndarray:
    """(4, 4) matrix of P(alice channel, bob channel) for one detected pair."""
    probs = np.zeros((4, 4))
    for i_a, basis_a in enumerate((Basis.HV, Basis.DA)):
        for i_b, basis_b in enumerate((Basis.HV, Basis.DA)):
            joint = outcome_probs(state, basis_a, basis_b)
            for out_a in range(2):
                for out_b in range(2):
                    probs[2 * i_a + out_a, 2 * i_b + out_b] = 0.25 * joint[out_a, out_b]
    return probs / probs.sum()


def _sample_categorical(rng: np.random.Generator, pmf: np.ndarray, n: int) -> np.ndarray:
    edges = np.cumsum(pmf)
    edges[-1] = 1.0
    return np.searchsorted(edges, rng.random(n), side="right").astype(np.uint8)


def generate_block(
    duration_s: float,
    source: SourceConfig,
    fiber: FiberConfig,
    drift_u: PolarizationUnitary,
    lcvr: LcvrStack,
    det_a: DetectorConfig,
    det_b: DetectorConfig,
    clock: ClockModel,
    seed: int,
    start_s: float = 0.0,
) -> SimBlock:
    """Simulate one block; byte-identical output for identical arguments."""
    if duration_s <= 0:
        raise ValueError("duration must be > 0")
    root = np.random.SeedSequence(entropy=seed)
    rngs = [np.random.default_rng(s) for s in root.spawn(6)]
    rng_counts, rng_pair, rng_aonly, rng_bonly, rng_dark_a, rng_dark_b = rngs

    effective = apply_local(
        source.emitted_state(),
        PolarizationUnitary(lcvr_unitary(lcvr).u @ drift_u.u),
        Side.ALICE,
    )
    joint = _joint_channel_probs(effective)
    marg_a = joint.sum(axis=1)
    marg_b = joint.sum(axis=0)

    t_a = side_transmission(fiber, det_a, Side.ALICE)
    t_b = side_transmission(fiber, det_b, Side.BOB)
    r = source.generated_pair_rate_hz
    lam = {
        "pair": r * t_a * t_b,
        "aonly": r * t_a * (1.0 - t_b),
        "bonly": r * t_b * (1.0 - t_a),
        "dark_a": 4.0 * det_a.dark_rate_hz,
        "dark_b": 4.0 * det_b.dark_rate_hz,
    }
    n = {k: int(rng_counts.poisson(v * duration_s)) for k, v in lam.items()}

    delay_ps = propagation_delay(fiber)
    dur_ps = duration_s * 1e12
    start_ps = start_s * 1e12

    def alice_times(rng: np.random.Generator, emit_ps: np.ndarray) -> np.ndarray:
        t = emit_ps + delay_ps
        if det_a.jitter_sigma_ps > 0:
            t = t + rng.normal(0.0, det_a.jitter_sigma_ps, len(emit_ps))
        return clock.apply_ps(t)

    def bob_times(rng: np.random.Generator, emit_ps: np.ndarray) -> np.ndarray:
        if det_b.jitter_sigma_ps > 0:
            return emit_ps + rng.normal(0.0, det_b.jitter_sigma_ps, len(emit_ps))
        return emit_ps.copy()

    # Genuine pairs surviving on both arms.
    emit = start_ps + rng_pair.random(n["pair"]) * dur_ps
    pair_idx = _sample_categorical(rng_pair, joint.ravel(), n["pair"])
    a_times = [alice_times(rng_pair, emit)]
    a_chans = [(pair_idx // 4).astype(np.uint8)]
    b_times = [bob_times(rng_pair, emit)]
    b_chans = [(pair_idx % 4).astype(np.uint8)]

    # Single-arm survivors and darks.
    emit_a = start_ps + rng_aonly.random(n["aonly"]) * dur_ps
    a_times.append(alice_times(rng_aonly, emit_a))
    a_chans.append(_sample_categorical(rng_aonly, marg_a, n["aonly"]))

    emit_b = start_ps + rng_bonly.random(n["bonly"]) * dur_ps
    b_times.append(bob_times(rng_bonly, emit_b))
    b_chans.append(_sample_categorical(rng_bonly, marg_b, n["bonly"]))

    dark_a = start_ps + rng_dark_a.random(n["dark_a"]) * dur_ps
    a_times.append(clock.apply_ps(dark_a))
    a_chans.append(rng_dark_a.integers(0, 4, n["dark_a"], dtype=np.uint8))

    dark_b = start_ps + rng_dark_b.random(n["dark_b"]) * dur_ps
    b_times.append(dark_b)
    b_chans.append(rng_dark_b.integers(0, 4, n["dark_b"], dtype=np.uint8))

    def finalize(times_parts, chan_parts, dead_time_ns, n_pair):
        times = np.concatenate(times_parts) if times_parts else np.empty(0)
        chans = np.concatenate(chan_parts) if chan_parts else np.empty(0, dtype=np.uint8)
        ticks = np.floor(times / TICK_PS).astype(np.int64)
        pair_id = np.full(len(ticks), -1, dtype=np.int64)
        pair_id[:n_pair] = np.arange(n_pair)
        valid = ticks >= 0
        ticks, chans, pair_id = ticks[valid], chans[valid], pair_id[valid]
        order = np.lexsort((chans, ticks))
        ticks, chans, pair_id = ticks[order], chans[order], pair_id[order]
        keep = kernels.deadtime_filter(ticks, chans, int(round(dead_time_ns * 1000.0 / TICK_PS)))
        ticks, chans, pair_id = ticks[keep], chans[keep], pair_id[keep]
        # Map surviving pair ids to their final stream positions.
        pos = np.full(n_pair, -1, dtype=np.int64)
        live = pair_id >= 0
        pos[pair_id[live]] = np.flatnonzero(live)
        return TagStream(ticks, chans), pos

    stream_a, pos_a = finalize(a_times, a_chans, det_a.dead_time_ns, n["pair"])
    stream_b, pos_b = finalize(b_times, b_chans, det_b.dead_time_ns, n["pair"])
    both = (pos_a >= 0) & (pos_b >= 0)
    truth = np.stack([pos_a[both], pos_b[both]], axis=1)

    params = {
        "duration_s": duration_s,
        "start_s": start_s,
        "seed": seed,
        "source": source,
        "fiber": fiber,
        "det_a": det_a,
        "det_b": det_b,
        "clock": clock,
    }
    return SimBlock(alice_tags=stream_a, bob_tags=stream_b, truth=truth, params=params)
