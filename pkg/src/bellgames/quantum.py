"""Two-qubit density matrices, Bloch-vector measurements and outcome sampling.

Measurements are rank-1 projective qubit observables with eigenvalues +1/-1,
described by unit Bloch vectors.  States are validated once at construction;
the evaluation paths assume valid inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class BlochVector:
    """Unit vector on the Bloch sphere; the +1 outcome direction of a measurement."""

    vx: float
    vy: float
    vz: float

    def __post_init__(self):
        norm = math.sqrt(self.vx**2 + self.vy**2 + self.vz**2)
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"Bloch vector must have unit norm, got {norm!r}")

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        v = np.asarray(v, dtype=float)
        n = float(np.linalg.norm(v))
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return cls(float(v[0] / n), float(v[1] / n), float(v[2] / n))

    @classmethod
    def in_plane(cls, theta: float) -> "BlochVector":
        """Vector in the x-z plane at angle ``theta`` measured from +z."""
        return cls(math.sin(theta), 0.0, math.cos(theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.vz])

    def observable(self) -> np.ndarray:
        """The 2x2 observable v . sigma."""
        return self.vx * SIGMA_X + self.vy * SIGMA_Y + self.vz * SIGMA_Z


X_AXIS = BlochVector(1.0, 0.0, 0.0)
Y_AXIS = BlochVector(0.0, 1.0, 0.0)
Z_AXIS = BlochVector(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class TwoQubitState:
    """A 4x4 density matrix, validated Hermitian, unit-trace and PSD."""

    rho: np.ndarray
    label: str | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace must be 1, got {tr!r}")
        if float(np.linalg.eigvalsh(rho)[0]) < -PSD_TOL:
            raise ValueError("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def bloch_marginals(self) -> tuple[np.ndarray, np.ndarray]:
        """Local Bloch vectors (u, v) with u_i = Tr(rho sigma_i x I)."""
        eye = np.eye(2)
        u = np.array([np.trace(self.rho @ np.kron(s, eye)).real for s in PAULI])
        v = np.array([np.trace(self.rho @ np.kron(eye, s)).real for s in PAULI])
        return u, v

    def correlation_matrix(self) -> np.ndarray:
        """3x3 matrix T with T_ij = Tr(rho sigma_i x sigma_j)."""
        t = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                t[i, j] = np.trace(self.rho @ np.kron(PAULI[i], PAULI[j])).real
        return t


@dataclass(frozen=True)
class MeasurementFrame:
    """One Bloch vector per setting, per party."""

    vectors: tuple[tuple[BlochVector, ...], ...]

    def __post_init__(self):
        vecs = tuple(tuple(party) for party in self.vectors)
        if not vecs or any(len(party) == 0 for party in vecs):
            raise ValueError("measurement frame must list at least one vector per party")
        object.__setattr__(self, "vectors", vecs)

    @property
    def n_parties(self) -> int:
        return len(self.vectors)

    def settings_per_party(self) -> tuple[int, ...]:
        return tuple(len(party) for party in self.vectors)


def make_singlet() -> TwoQubitState:
    """The singlet state: perfect anticorrelation along any common axis."""
    psi = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0)
    return TwoQubitState(np.outer(psi, psi.conj()), label="singlet")


def make_werner(p: float) -> TwoQubitState:
    """Mixture (1-p)/4 * I + p * singlet; correlator is -p (a.b)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner parameter must lie in [0, 1], got {p!r}")
    rho = (1.0 - p) / 4.0 * np.eye(4, dtype=complex) + p * make_singlet().rho
    return TwoQubitState(rho, label=f"werner({p:g})")


def correlator(state: TwoQubitState, a: BlochVector, b: BlochVector) -> float:
    """Joint +1/-1 outcome correlator Tr(rho (a.sigma) x (b.sigma))."""
    value = np.trace(state.rho @ np.kron(a.observable(), b.observable())).real
    if abs(value) > 1.0 + 1e-10:
        raise ValueError(f"correlator escaped [-1, 1]: {value!r}")
    return float(min(1.0, max(-1.0, value)))


def chsh_value(state: TwoQubitState, frame: MeasurementFrame) -> float:
    """E(A0 B0) + E(A0 B1) + E(A1 B0) - E(A1 B1) for a two-setting frame."""
    if frame.n_parties != 2 or frame.settings_per_party() != (2, 2):
        raise ValueError(
            f"CHSH needs 2 settings for each of 2 parties, got {frame.settings_per_party()}"
        )
    (a0, a1), (b0, b1) = frame.vectors
    return (
        correlator(state, a0, b0)
        + correlator(state, a0, b1)
        + correlator(state, a1, b0)
        - correlator(state, a1, b1)
    )


def chsh_optimal_frame() -> MeasurementFrame:
    """The frame maximizing the CHSH combination on Werner states.

    A0 = z, A1 = x; B0 = -(z+x)/sqrt2, B1 = (x-z)/sqrt2.  Since the Werner
    correlator is -p (a.b), Bob's vectors carry the opposite sign of the
    textbook (z+x)/sqrt2, (z-x)/sqrt2 pair; this is the choice that makes the
    combination equal +2 sqrt2 p rather than its negative.
    """
    s = 1.0 / math.sqrt(2.0)
    return MeasurementFrame(
        (
            (Z_AXIS, X_AXIS),
            (BlochVector(-s, 0.0, -s), BlochVector(s, 0.0, -s)),
        )
    )


def joint_sign_distribution(e: float, ma: float = 0.0, mb: float = 0.0) -> np.ndarray:
    """P(alpha, beta) over {+1,-1}^2 as a 2x2 array indexed by (bit_a, bit_b).

    bit 0 means outcome +1, bit 1 means outcome -1.
    """
    p = np.empty((2, 2))
    for ia, alpha in enumerate((1.0, -1.0)):
        for ib, beta in enumerate((1.0, -1.0)):
            p[ia, ib] = (1.0 + alpha * ma + beta * mb + alpha * beta * e) / 4.0
    if p.min() < -1e-12:
        raise ValueError("joint outcome law has a negative cell; state/vectors inconsistent")
    return np.clip(p, 0.0, None)


def sample_sign_pairs(corr, rng: np.random.Generator, ma=0.0, mb=0.0):
    """Vectorized draw of (alpha, beta) in {+1,-1}^2 from the joint 4-point law.

    ``corr``, ``ma``, ``mb`` broadcast to a common shape; one pair is drawn
    per element.
    """
    corr = np.asarray(corr, dtype=float)
    ma = np.broadcast_to(np.asarray(ma, dtype=float), corr.shape)
    mb = np.broadcast_to(np.asarray(mb, dtype=float), corr.shape)
    p_pp = (1.0 + ma + mb + corr) / 4.0
    p_pm = (1.0 + ma - mb - corr) / 4.0
    p_mp = (1.0 - ma + mb - corr) / 4.0
    u = rng.random(corr.shape)
    c1 = p_pp
    c2 = p_pp + p_pm
    c3 = c2 + p_mp
    alpha = np.where(u < c2, 1, -1)
    beta = np.where((u < c1) | ((u >= c2) & (u < c3)), 1, -1)
    return alpha, beta


def sample_outcomes(
    state: TwoQubitState, a: BlochVector, b: BlochVector, rng: np.random.Generator
) -> tuple[int, int]:
    """One draw from P(alpha, beta) = (1 + alpha mA + beta mB + alpha beta E) / 4."""
    u, v = state.bloch_marginals()
    e = correlator(state, a, b)
    alpha, beta = sample_sign_pairs(
        np.array(e), rng, ma=float(u @ a.as_array()), mb=float(v @ b.as_array())
    )
    return int(alpha), int(beta)
