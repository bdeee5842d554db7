"""
Truncated Fock-space linear algebra for the hybrid qubit-oscillator system.
Operators, states, tensor products with the qubit and Hermitian exponentials.

Conventions:
    Hybrid index = qubit * cutoff + fock (the qubit is the slow index).
    Qubit basis order is (|down>, |up>) and sigma_z |down> = +|down>, so that
    post-selecting |down> after a sigma_z-conditioned phase keeps exp(+i theta cos(.)).
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import linalg

from shared import get_logger
from shared.config_loader import get_nested
from shared.errors import (
    InvalidSpaceError,
    NotHermitianError,
    TruncationOverflowError,
)

logger = get_logger("hilbert")

DOWN = 0
UP = 1
QUBIT_LABELS = {"down": DOWN, "up": UP}

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-10
PSD_TOL = -1e-10


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype=complex)
    matrix.setflags(write=False)
    return matrix


def _hermitian_defect(matrix: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    return float(np.max(np.abs(matrix - matrix.conj().T))) / scale


# =========================================================================
# SPACES AND OPERATORS
# =========================================================================

@dataclass(frozen=True)
class FockSpace:
    """Truncated Fock space; dimension equals the cutoff."""

    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise InvalidSpaceError(f"Fock cutoff must be an integer >= 2, got {self.cutoff}")

    @property
    def dim(self) -> int:
        return self.cutoff

    @property
    def hybrid_dim(self) -> int:
        return 2 * self.cutoff

    @classmethod
    def default(cls) -> "FockSpace":
        return cls(int(get_nested("numerics.cutoff", 100)))


@dataclass(frozen=True, eq=False)
class OscillatorOperator:
    """Dense operator on the truncated oscillator space."""

    space: FockSpace
    matrix: np.ndarray
    hermitian: Optional[bool] = None

    def __post_init__(self):
        matrix = _frozen(self.matrix)
        if matrix.shape != (self.space.dim, self.space.dim):
            raise InvalidSpaceError(
                f"Operator shape {matrix.shape} does not match cutoff {self.space.cutoff}"
            )
        if self.hermitian and _hermitian_defect(matrix) > HERMITIAN_TOL:
            raise NotHermitianError("Operator flagged Hermitian but is not")
        object.__setattr__(self, "matrix", matrix)

    def dag(self) -> "OscillatorOperator":
        return OscillatorOperator(self.space, self.matrix.conj().T, self.hermitian)

    def __matmul__(self, other: "OscillatorOperator") -> "OscillatorOperator":
        _same_space(self.space, other.space)
        return OscillatorOperator(self.space, self.matrix @ other.matrix)

    def __add__(self, other: "OscillatorOperator") -> "OscillatorOperator":
        _same_space(self.space, other.space)
        return OscillatorOperator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "OscillatorOperator") -> "OscillatorOperator":
        _same_space(self.space, other.space)
        return OscillatorOperator(self.space, self.matrix - other.matrix)

    def scale(self, factor: complex) -> "OscillatorOperator":
        return OscillatorOperator(self.space, factor * self.matrix)


@dataclass(frozen=True, eq=False)
class HybridOperator:
    """Dense operator on qubit (x) oscillator, qubit-slow ordering."""

    space: FockSpace
    matrix: np.ndarray
    hermitian: Optional[bool] = None

    def __post_init__(self):
        matrix = _frozen(self.matrix)
        if matrix.shape != (self.space.hybrid_dim, self.space.hybrid_dim):
            raise InvalidSpaceError(
                f"Hybrid operator shape {matrix.shape} does not match 2 x cutoff {self.space.cutoff}"
            )
        if self.hermitian and _hermitian_defect(matrix) > HERMITIAN_TOL:
            raise NotHermitianError("Operator flagged Hermitian but is not")
        object.__setattr__(self, "matrix", matrix)

    def dag(self) -> "HybridOperator":
        return HybridOperator(self.space, self.matrix.conj().T, self.hermitian)

    def __matmul__(self, other: "HybridOperator") -> "HybridOperator":
        _same_space(self.space, other.space)
        return HybridOperator(self.space, self.matrix @ other.matrix)


Operator = Union[OscillatorOperator, HybridOperator]


@dataclass(frozen=True)
class QubitAxis:
    """Rotation by angle theta about n(phi) = (0, sin phi, cos phi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("QubitAxis angles must be finite")

    def matrix(self) -> np.ndarray:
        n_dot_sigma = math.sin(self.phi) * PAULI["y"] + math.cos(self.phi) * PAULI["z"]
        return math.cos(self.theta / 2) * PAULI["i"] - 1j * math.sin(self.theta / 2) * n_dot_sigma


def _same_space(a: FockSpace, b: FockSpace):
    if a != b:
        raise InvalidSpaceError(f"Space mismatch: cutoff {a.cutoff} vs {b.cutoff}")


# =========================================================================
# STATES
# =========================================================================

@dataclass(frozen=True, eq=False)
class HybridState:
    """
    Qubit (x) oscillator state, either a pure vector or a density matrix.

    Invariants are checked on construction: unit norm / unit trace within
    1e-10, Hermitian density matrices, eigenvalues >= -1e-10.
    """

    space: FockSpace
    kind: str
    data: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.kind not in ("pure", "density"):
            raise ValueError(f"Unknown state kind: {self.kind}")
        data = _frozen(self.data)
        dim = self.space.hybrid_dim
        expected = (dim,) if self.kind == "pure" else (dim, dim)
        if data.shape != expected:
            raise InvalidSpaceError(f"State shape {data.shape}, expected {expected}")
        object.__setattr__(self, "data", data)
        if self.validate:
            self._check()

    def _check(self):
        if self.kind == "pure":
            norm = float(np.vdot(self.data, self.data).real)
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"Pure state not normalized: norm^2 = {norm:.12f}")
            return
        if _hermitian_defect(self.data) > NORM_TOL:
            raise ValueError("Density matrix is not Hermitian")
        trace = float(np.trace(self.data).real)
        if abs(trace - 1.0) > NORM_TOL:
            raise ValueError(f"Density matrix trace {trace:.12f} != 1")
        min_eig = float(np.min(linalg.eigvalsh(self.data)))
        if min_eig < PSD_TOL:
            raise ValueError(f"Density matrix not positive: min eigenvalue {min_eig:.3e}")

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def density(self) -> np.ndarray:
        """Density matrix of the state (computed for pure states)."""
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def as_density(self) -> "HybridState":
        if not self.is_pure:
            return self
        return HybridState(self.space, "density", self.density(), validate=False)


def vacuum(space: FockSpace) -> np.ndarray:
    vec = np.zeros(space.dim, dtype=complex)
    vec[0] = 1.0
    return vec


def fock_state(space: FockSpace, n: int) -> np.ndarray:
    if not 0 <= n < space.dim:
        raise InvalidSpaceError(f"Fock level {n} outside cutoff {space.cutoff}")
    vec = np.zeros(space.dim, dtype=complex)
    vec[n] = 1.0
    return vec


def qubit_vector(label: str) -> np.ndarray:
    vec = np.zeros(2, dtype=complex)
    vec[QUBIT_LABELS[label]] = 1.0
    return vec


def product_state(
    space: FockSpace,
    oscillator: Optional[np.ndarray] = None,
    qubit: Union[str, np.ndarray] = "down",
) -> HybridState:
    """
    Build |qubit> (x) |oscillator> as a pure hybrid state.

    Args:
        space: Fock space
        oscillator: Oscillator vector (vacuum if None)
        qubit: "down", "up" or an explicit 2-vector

    Returns:
        Normalized pure HybridState
    """
    osc = vacuum(space) if oscillator is None else np.asarray(oscillator, dtype=complex)
    q = qubit_vector(qubit) if isinstance(qubit, str) else np.asarray(qubit, dtype=complex)
    if osc.shape != (space.dim,) or q.shape != (2,):
        raise InvalidSpaceError("Product state factors have the wrong dimension")
    vec = np.kron(q, osc)
    return HybridState(space, "pure", vec / np.linalg.norm(vec))


def coherent_state(space: FockSpace, alpha: complex) -> np.ndarray:
    """Coherent oscillator vector D(alpha)|0> (tail-checked)."""
    return displacement(space, alpha).matrix[:, 0].copy()


def thermal_state(space: FockSpace, n_bar: float, qubit: str = "down") -> HybridState:
    """
    Thermal oscillator state with mean occupation n_bar, qubit in a basis state.

    Returns a density HybridState; n_bar = 0 gives the vacuum.
    """
    if n_bar < 0:
        raise ValueError("n_bar must be nonnegative")
    levels = np.arange(space.dim)
    if n_bar == 0:
        populations = (levels == 0).astype(float)
    else:
        ratio = n_bar / (1.0 + n_bar)
        populations = ratio ** levels
        populations /= populations.sum()
    q = np.zeros((2, 2), dtype=complex)
    q[QUBIT_LABELS[qubit], QUBIT_LABELS[qubit]] = 1.0
    rho = np.kron(q, np.diag(populations).astype(complex))
    state = HybridState(space, "density", rho)
    check_tail(state)
    return state


# =========================================================================
# OPERATOR CONSTRUCTORS
# =========================================================================

def ladder(space: FockSpace) -> Tuple[OscillatorOperator, OscillatorOperator]:
    """
    Annihilation and creation operators, a[m, m+1] = sqrt(m+1).

    Returns:
        (a, a_dagger)
    """
    a = np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), k=1).astype(complex)
    return OscillatorOperator(space, a), OscillatorOperator(space, a.conj().T)


def number(space: FockSpace) -> OscillatorOperator:
    return OscillatorOperator(space, np.diag(np.arange(space.dim, dtype=float)), hermitian=True)


def quadratures(space: FockSpace) -> Tuple[OscillatorOperator, OscillatorOperator]:
    """Dimensionless x = (a + a^dag)/sqrt2 and p = -i(a - a^dag)/sqrt2."""
    a, adag = ladder(space)
    x = (a.matrix + adag.matrix) / math.sqrt(2)
    p = -1j * (a.matrix - adag.matrix) / math.sqrt(2)
    return OscillatorOperator(space, x, hermitian=True), OscillatorOperator(space, p, hermitian=True)


def rotated_quadrature(space: FockSpace, angle: float) -> OscillatorOperator:
    """x_angle = (a e^{-i angle} + a^dag e^{i angle})/sqrt2 = x cos(angle) + p sin(angle)."""
    a, adag = ladder(space)
    matrix = (a.matrix * np.exp(-1j * angle) + adag.matrix * np.exp(1j * angle)) / math.sqrt(2)
    return OscillatorOperator(space, matrix, hermitian=True)


def identity(space: FockSpace) -> OscillatorOperator:
    return OscillatorOperator(space, np.eye(space.dim), hermitian=True)


def interior_projector(space: FockSpace, margin: int = 1) -> np.ndarray:
    """Projector onto Fock levels below cutoff - margin (oscillator space)."""
    diag = (np.arange(space.dim) < space.dim - margin).astype(complex)
    return np.diag(diag)


def hybrid_interior_projector(space: FockSpace, margin: int = 1) -> np.ndarray:
    return np.kron(np.eye(2), interior_projector(space, margin))


# =========================================================================
# EXPONENTIALS
# =========================================================================

def _expm_hermitian(matrix: np.ndarray, t: float) -> np.ndarray:
    if _hermitian_defect(matrix) > HERMITIAN_TOL:
        raise NotHermitianError(
            f"Generator is not Hermitian (relative defect {_hermitian_defect(matrix):.3e})"
        )
    herm = 0.5 * (matrix + matrix.conj().T)
    energies, vectors = linalg.eigh(herm)
    return (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T


def hermitian_exponential(H: Operator, t: float) -> Operator:
    """
    Return exp(-i H t) via Hermitian eigendecomposition.

    Args:
        H: Oscillator or hybrid operator, Hermitian within 1e-10
        t: Time (or angle) multiplying the generator

    Returns:
        Unitary of the same operator type as H

    Raises:
        NotHermitianError: If H is not Hermitian
    """
    unitary = _expm_hermitian(np.asarray(H.matrix), t)
    return type(H)(H.space, unitary)


@lru_cache(maxsize=512)
def _displacement_matrix(cutoff: int, re: float, im: float) -> np.ndarray:
    space = FockSpace(cutoff)
    alpha = complex(re, im)
    a, adag = ladder(space)
    # D = exp(alpha a^dag - alpha* a) = exp(-i G) with Hermitian G = i(alpha a^dag - alpha* a)
    generator = 1j * (alpha * adag.matrix - np.conj(alpha) * a.matrix)
    matrix = _expm_hermitian(generator, 1.0)
    matrix.setflags(write=False)
    return matrix


def required_cutoff(mean_quanta: float, cutoff: Optional[int] = None) -> int:
    """
    Cutoff giving ~10 sigma of headroom above a state with the given mean
    occupation. Given the cutoff that just failed, never suggests less than
    twice that cutoff.
    """
    tail_levels = int(get_nested("numerics.tail_levels", 10))
    suggestion = int(math.ceil(mean_quanta + 10.0 * math.sqrt(mean_quanta + 1.0))) + tail_levels
    if cutoff is not None and suggestion <= cutoff:
        suggestion = 2 * cutoff
    return suggestion


def displacement(space: FockSpace, alpha: complex) -> OscillatorOperator:
    """
    Displacement operator D(alpha) = exp(alpha a^dag - alpha* a).

    Raises:
        TruncationOverflowError: If D(alpha)|0> leaks into the top Fock levels
    """
    matrix = _displacement_matrix(space.cutoff, float(np.real(alpha)), float(np.imag(alpha)))
    tail = _tail_mass_vector(space, matrix[:, 0])
    if tail >= _tail_tolerance():
        raise TruncationOverflowError(tail, space.cutoff, required_cutoff(abs(alpha) ** 2, space.cutoff))
    return OscillatorOperator(space, matrix)


def qubit_rotation(axis: str, angle: float) -> np.ndarray:
    """R_m(angle) = exp(-i angle sigma_m / 2) for m in {x, y, z}."""
    return math.cos(angle / 2) * PAULI["i"] - 1j * math.sin(angle / 2) * PAULI[axis]


# =========================================================================
# EMBEDDING AND EXPECTATIONS
# =========================================================================

def embed(op: Union[np.ndarray, OscillatorOperator], space: Optional[FockSpace] = None) -> HybridOperator:
    """
    Embed a qubit 2x2 matrix or an oscillator operator into the hybrid space.

    Args:
        op: 2x2 qubit matrix (requires space) or OscillatorOperator
        space: Fock space for qubit operators

    Returns:
        HybridOperator (qubit (x) identity or identity (x) oscillator)
    """
    if isinstance(op, OscillatorOperator):
        if space is not None:
            _same_space(space, op.space)
        return HybridOperator(op.space, np.kron(np.eye(2), op.matrix), op.hermitian)
    matrix = np.asarray(op, dtype=complex)
    if matrix.shape != (2, 2):
        raise InvalidSpaceError(f"Qubit operator must be 2x2, got {matrix.shape}")
    if space is None:
        raise InvalidSpaceError("A FockSpace is required to embed a qubit operator")
    return HybridOperator(space, np.kron(matrix, np.eye(space.dim)))


def expectation(op: Operator, state: HybridState) -> complex:
    """<op> in the given state; oscillator operators are embedded automatically."""
    hybrid = embed(op) if isinstance(op, OscillatorOperator) else op
    _same_space(hybrid.space, state.space)
    if state.is_pure:
        return complex(np.vdot(state.data, hybrid.matrix @ state.data))
    return complex(np.trace(hybrid.matrix @ state.data))


def mean_occupation(state: HybridState) -> float:
    """Mean phonon number <a^dag a>."""
    return float(expectation(number(state.space), state).real)


def reduced_oscillator(state: HybridState) -> np.ndarray:
    """Partial trace over the qubit."""
    n = state.space.dim
    rho = state.density().reshape(2, n, 2, n)
    return np.einsum("aiaj->ij", rho)


def reduced_qubit(state: HybridState) -> np.ndarray:
    """Partial trace over the oscillator."""
    n = state.space.dim
    rho = state.density().reshape(2, n, 2, n)
    return np.einsum("anbn->ab", rho)


def purity(state: HybridState) -> float:
    if state.is_pure:
        return 1.0
    return float(np.real(np.trace(state.data @ state.data)))


# =========================================================================
# TRUNCATION CHECKS
# =========================================================================

def _tail_tolerance() -> float:
    return float(get_nested("numerics.tail_tolerance", 1e-8))


def replay_tail_tolerance() -> float:
    """
    Tail limit for Trotterized replays. The kicked oscillator diffuses a thin
    population to high Fock levels that no practical cutoff removes.
    """
    return float(get_nested("numerics.replay_tail_tolerance", 1e-4))


def _tail_levels(space: FockSpace) -> int:
    return min(int(get_nested("numerics.tail_levels", 10)), space.dim - 1)


def _tail_mass_vector(space: FockSpace, osc_vec: np.ndarray) -> float:
    levels = _tail_levels(space)
    return float(np.sum(np.abs(osc_vec[space.dim - levels:]) ** 2))


def tail_mass(state: HybridState) -> float:
    """Population in the top Fock levels (both qubit branches)."""
    n = state.space.dim
    levels = _tail_levels(state.space)
    if state.is_pure:
        pops = np.abs(state.data.reshape(2, n)) ** 2
    else:
        pops = np.real(np.diagonal(state.data)).reshape(2, n)
    return float(np.sum(pops[:, n - levels:]))


def check_tail(state: HybridState, tolerance: Optional[float] = None) -> HybridState:
    """
    Verify the tail-mass rule; returns the state for chaining.

    Args:
        state: State to check
        tolerance: Tail limit (default numerics.tail_tolerance)

    Raises:
        TruncationOverflowError: If the top levels hold >= tolerance
    """
    mass = tail_mass(state)
    if mass >= (_tail_tolerance() if tolerance is None else tolerance):
        raise TruncationOverflowError(
            mass, state.space.cutoff, required_cutoff(mean_occupation(state), state.space.cutoff)
        )
    return state
