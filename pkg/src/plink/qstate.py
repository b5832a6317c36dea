"""Two-qubit polarization-state math.

Density matrices over {H,V} x {H,V} (basis order HH, HV, VH, VV), local
Jones unitaries, projective coincidence probabilities, and the derived
QBER / visibility figures used everywhere else in the pipeline.

Conventions, fixed once:
  * H is the 0-degree linear polarization; V is 90 degrees.
  * The D/A basis is +45 / -45 degrees linear (D = 45, A = 135).
  * Bit mapping at the analyzers: H and D decode to bit 0, V and A to bit 1.
  * ``visibility`` sweeps Bob's analyzer with Alice fixed at the basis angle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_TOL = 1e-10
UNITARITY_TOL = 1e-12


class Basis(enum.Enum):
    HV = "HV"
    DA = "DA"

    @property
    def angles_deg(self) -> tuple[float, float]:
        """Analyzer angles for (bit 0, bit 1) outcomes."""
        return (0.0, 90.0) if self is Basis.HV else (45.0, 135.0)


class Side(enum.Enum):
    ALICE = "alice"
    BOB = "bob"


class StateError(ValueError):
    """A matrix violates the density-matrix or unitarity invariants."""


@dataclass(frozen=True)
class TwoQubitPolarizationState:
    """4x4 density matrix, basis order HH, HV, VH, VV."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise StateError(f"state must be 4x4, got {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=HERMITIAN_TOL, rtol=0):
            raise StateError("state is not Hermitian")
        if abs(np.trace(rho).real - 1.0) >= TRACE_TOL or abs(np.trace(rho).imag) >= TRACE_TOL:
            raise StateError(f"state trace is {np.trace(rho)}, expected 1")
        eigs = np.linalg.eigvalsh(rho)
        if eigs.min() < -EIGENVALUE_TOL:
            raise StateError(f"state has negative eigenvalue {eigs.min()}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class PolarizationUnitary:
    """2x2 Jones matrix, unitary within 1e-12."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.shape != (2, 2):
            raise StateError(f"unitary must be 2x2, got {u.shape}")
        if not np.allclose(u @ u.conj().T, np.eye(2), atol=UNITARITY_TOL, rtol=0):
            raise StateError("matrix is not unitary")
        object.__setattr__(self, "u", u)

    def dagger(self) -> "PolarizationUnitary":
        return PolarizationUnitary(self.u.conj().T)

    def __matmul__(self, other: "PolarizationUnitary") -> "PolarizationUnitary":
        return PolarizationUnitary(self.u @ other.u)


@dataclass(frozen=True)
class AnalyzerSetting:
    """One side's analyzer: a named basis or a free linear-analyzer angle."""

    side: Side
    basis: Basis | None = None
    angle_deg: float | None = None

    def __post_init__(self):
        if (self.basis is None) == (self.angle_deg is None):
            raise ValueError("set exactly one of basis or angle_deg")
        if self.angle_deg is not None and not 0.0 <= self.angle_deg < 360.0:
            raise ValueError(f"angle {self.angle_deg} outside [0, 360)")


def identity() -> PolarizationUnitary:
    return PolarizationUnitary(np.eye(2))


def rotation(theta_deg: float) -> PolarizationUnitary:
    """Rotation of the polarization plane by theta (H toward V)."""
    t = np.deg2rad(theta_deg)
    return PolarizationUnitary(np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]))


def phi_plus() -> TwoQubitPolarizationState:
    """Maximally entangled state (|HH> + |VV>)/sqrt(2) as a density matrix."""
    ket = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / np.sqrt(2.0)
    return TwoQubitPolarizationState(np.outer(ket, ket.conj()))


def werner(v: float) -> TwoQubitPolarizationState:
    """Isotropic mixture v*|phi+><phi+| + (1-v)*I/4; visibility equals v."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility {v} outside [0, 1]")
    return TwoQubitPolarizationState(v * phi_plus().rho + (1.0 - v) * np.eye(4) / 4.0)


def apply_local(
    state: TwoQubitPolarizationState, u: PolarizationUnitary, side: Side
) -> TwoQubitPolarizationState:
    """Conjugate the state by u on one arm: (u (x) I) rho (u (x) I)^dagger."""
    big = np.kron(u.u, np.eye(2)) if side is Side.ALICE else np.kron(np.eye(2), u.u)
    return TwoQubitPolarizationState(big @ state.rho @ big.conj().T)


def _analyzer_ket(angle_deg: float) -> np.ndarray:
    t = np.deg2rad(angle_deg)
    return np.array([np.cos(t), np.sin(t)], dtype=complex)


def projector(angle_deg: float) -> np.ndarray:
    """Linear-polarizer projector |theta><theta| in the H/V frame."""
    ket = _analyzer_ket(angle_deg)
    return np.outer(ket, ket.conj())


def coincidence_prob(
    state: TwoQubitPolarizationState, angle_a_deg: float, angle_b_deg: float
) -> float:
    """tr[(P(angle_a) (x) P(angle_b)) rho], the joint pass probability."""
    joint = np.kron(projector(angle_a_deg), projector(angle_b_deg))
    p = np.trace(joint @ state.rho).real
    # Clip eigensolver-scale negatives; anything larger is a real defect.
    if not -1e-9 <= p <= 1.0 + 1e-9:
        raise StateError(f"coincidence probability {p} outside [0, 1]")
    return min(max(p, 0.0), 1.0)


def outcome_probs(state: TwoQubitPolarizationState, basis_a: Basis, basis_b: Basis) -> np.ndarray:
    """2x2 array of joint outcome probabilities for fixed analyzer bases.

    Entry [i, j] is P(Alice bit i, Bob bit j); the four entries sum to 1.
    """
    probs = np.empty((2, 2))
    for i, ta in enumerate(basis_a.angles_deg):
        for j, tb in enumerate(basis_b.angles_deg):
            probs[i, j] = coincidence_prob(state, ta, tb)
    return probs


def qber_prediction(state: TwoQubitPolarizationState, basis: Basis) -> float:
    """Probability of differing bits when both sides measure in ``basis``."""
    probs = outcome_probs(state, basis, basis)
    total = probs.sum()
    if total <= 0.0:
        raise StateError("degenerate state: zero coincidence probability in basis")
    return float((probs[0, 1] + probs[1, 0]) / total)


def visibility(state: TwoQubitPolarizationState, basis: Basis) -> float:
    """Fringe contrast (max-min)/(max+min) of the coincidence curve.

    Alice's analyzer sits at the basis angle; Bob's is swept. The curve
    C(t) = a + b cos 2t + c sin 2t is reconstructed exactly from three
    probes, so no numeric sweep is needed.
    """
    fixed = basis.angles_deg[0]
    c0 = coincidence_prob(state, fixed, 0.0)
    c90 = coincidence_prob(state, fixed, 90.0)
    c45 = coincidence_prob(state, fixed, 45.0)
    mean = 0.5 * (c0 + c90)
    amp = np.hypot(0.5 * (c0 - c90), c45 - mean)
    if mean <= 0.0:
        return 0.0
    return float(amp / mean)
