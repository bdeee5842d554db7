"""
Target Hamiltonian family: harmonic term plus a Fourier-series potential.
Fourier fitting, double-well geometry and the spectrum of H_sim.

Units: energies and frequencies are angular (rad/s); positions are the
dimensionless oscillator quadrature x.
"""

from dataclasses import dataclass
import hashlib
import math
from typing import Callable, List, Tuple

import numpy as np
from scipy import integrate, linalg, optimize

from shared import get_logger
from shared.errors import ConvergenceError, FitError, NotADoubleWellError

from .hilbert import FockSpace, OscillatorOperator, quadratures

logger = get_logger("potential")

TWO_PI = 2.0 * math.pi
# brentq refuses rtol below 4 machine epsilons
ROOT_RTOL = 4.0 * np.finfo(float).eps


@dataclass(frozen=True)
class FourierTerm:
    """One term B cos(2 pi n x / lambda + Phi)."""

    n: int
    B: float
    Phi: float


@dataclass(frozen=True)
class FourierPotential:
    """
    V_total(x) = (delta/2) x^2 + sum_n B_n cos(2 pi n x / lam + Phi_n).

    Attributes:
        delta: Harmonic angular frequency (rad/s)
        lam: Fourier period (dimensionless length)
        terms: Fourier terms with distinct n >= 1; empty for a pure parabola
    """

    delta: float
    lam: float
    terms: Tuple[FourierTerm, ...] = ()

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"Fourier period must be positive, got {self.lam}")
        terms = tuple(
            t if isinstance(t, FourierTerm) else FourierTerm(int(t[0]), float(t[1]), float(t[2]))
            for t in self.terms
        )
        indices = [t.n for t in terms]
        if any(n < 1 for n in indices) or len(set(indices)) != len(indices):
            raise ValueError(f"Fourier indices must be distinct and >= 1, got {indices}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single_term(cls, delta: float, lam: float, B: float, Phi: float = 0.0) -> "FourierPotential":
        return cls(delta, lam, (FourierTerm(1, B, Phi),))

    @classmethod
    def from_gate_params(
        cls, delta: float, alpha0: float, theta: float, dt: float, phi: float = 0.0
    ) -> "FourierPotential":
        """Single-term potential from (alpha0, theta, dt, phi): lam = pi/(sqrt2 alpha0), B = theta/dt."""
        return cls.single_term(delta, math.pi / (math.sqrt(2) * alpha0), theta / dt, phi)

    def wavenumber(self, n: int = 1) -> float:
        return TWO_PI * n / self.lam

    def digest(self) -> str:
        """Stable short hash of the parameters (17 significant digits)."""
        parts = [f"{self.delta:.17g}", f"{self.lam:.17g}"]
        parts += [f"{t.n}:{t.B:.17g}:{t.Phi:.17g}" for t in self.terms]
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class WellGeometry:
    """Extrema and depths of a double well."""

    x_min_1: float
    x_min_2: float
    x_max: float
    barrier_left: float
    barrier_right: float
    xi: float

    @property
    def barrier_height(self) -> float:
        """Depth of the shallower well measured from the barrier top."""
        return min(self.barrier_left, self.barrier_right)


@dataclass(frozen=True)
class FourierFit:
    """Result of fourier_fit: terms, discarded mean and max residual."""

    terms: Tuple[FourierTerm, ...]
    offset: float
    residual: float
    lam: float

    def to_potential(self, delta: float) -> FourierPotential:
        return FourierPotential(delta, self.lam, self.terms)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues (rad/s) and eigenvectors (columns) of H_sim."""

    energies: np.ndarray
    vectors: np.ndarray
    space: FockSpace

    def populations(self, osc_state: np.ndarray) -> np.ndarray:
        """
        Eigenstate populations of an oscillator vector or density matrix.
        """
        osc_state = np.asarray(osc_state)
        if osc_state.ndim == 1:
            return np.abs(self.vectors.conj().T @ osc_state) ** 2
        return np.real(np.einsum("ij,jk,ki->i", self.vectors.conj().T, osc_state, self.vectors))

    def two_level_occupancy(self, osc_state: np.ndarray) -> float:
        return float(np.sum(self.populations(osc_state)[:2]))


# =========================================================================
# EVALUATION
# =========================================================================

def evaluate(potential: FourierPotential, x):
    """V_total(x) in rad/s; accepts scalars or numpy arrays."""
    x = np.asarray(x, dtype=float)
    value = 0.5 * potential.delta * x ** 2
    for term in potential.terms:
        value = value + term.B * np.cos(potential.wavenumber(term.n) * x + term.Phi)
    return float(value) if value.ndim == 0 else value


def derivative(potential: FourierPotential, x):
    """dV_total/dx in rad/s."""
    x = np.asarray(x, dtype=float)
    value = potential.delta * x
    for term in potential.terms:
        k = potential.wavenumber(term.n)
        value = value - term.B * k * np.sin(k * x + term.Phi)
    return float(value) if value.ndim == 0 else value


def fourier_only(potential: FourierPotential, x):
    """Fourier part of the potential without the parabola."""
    return evaluate(potential, x) - 0.5 * potential.delta * np.asarray(x, dtype=float) ** 2


# =========================================================================
# FOURIER FIT
# =========================================================================

def fourier_fit(V: Callable[[float], float], lam: float, N: int) -> FourierFit:
    """
    Order-N Fourier approximant of V on [-lam/2, lam/2], mean discarded.

    Coefficients come from adaptive quadrature; signs are folded into the
    phases so that B_n >= 0 and Phi_n in [0, 2 pi).

    Args:
        V: Real potential (rad/s) as a function of x
        lam: Period / interval length
        N: Number of Fourier terms

    Returns:
        FourierFit with terms n = 1..N, the discarded mean and the max
        residual |V - mean - fit| on a 1001-point grid

    Raises:
        FitError: If N < 1, lam <= 0 or V returns non-finite samples
    """
    if N < 1:
        raise FitError(f"Fourier order must be >= 1, got {N}")
    if not lam > 0:
        raise FitError(f"Fourier period must be positive, got {lam}")

    grid = np.linspace(-lam / 2, lam / 2, 1001)
    samples = np.array([float(V(x)) for x in grid])
    if not np.all(np.isfinite(samples)):
        raise FitError("Potential returned non-finite samples on the fit interval")

    half = lam / 2
    options = dict(limit=400, epsabs=1e-14, epsrel=1e-13)
    offset = integrate.quad(V, -half, half, **options)[0] / lam

    terms: List[FourierTerm] = []
    for n in range(1, N + 1):
        k = TWO_PI * n / lam
        a_n = 2.0 / lam * integrate.quad(lambda x: V(x) * math.cos(k * x), -half, half, **options)[0]
        b_n = 2.0 / lam * integrate.quad(lambda x: V(x) * math.sin(k * x), -half, half, **options)[0]
        # a cos(kx) + b sin(kx) = B cos(kx + Phi)
        B = math.hypot(a_n, b_n)
        Phi = math.fmod(math.atan2(-b_n, a_n) + TWO_PI, TWO_PI) if B > 0 else 0.0
        terms.append(FourierTerm(n, B, Phi))

    fitted = FourierPotential(0.0, lam, tuple(terms))
    residual = float(np.max(np.abs(samples - offset - evaluate(fitted, grid))))
    logger.debug(f"Fourier fit N={N} lam={lam:.6g}: residual {residual:.3e}")
    return FourierFit(tuple(terms), offset, residual, lam)


# =========================================================================
# DOUBLE-WELL GEOMETRY
# =========================================================================

def find_extrema(potential: FourierPotential, samples: int = 8001) -> Tuple[List[float], List[float]]:
    """
    Locate all extrema of V_total in [-lam, lam] by bracketed root finding on V'.

    Returns:
        (minima, maxima), each sorted ascending
    """
    scale = potential.delta if potential.delta != 0 else 1.0

    def slope(x: float) -> float:
        return derivative(potential, x) / scale

    grid = np.linspace(-potential.lam, potential.lam, samples)
    values = derivative(potential, grid) / scale
    roots = []
    for left, right, v_left, v_right in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if v_left == 0.0:
            roots.append(float(left))
        elif v_left * v_right < 0:
            try:
                roots.append(optimize.brentq(slope, left, right, xtol=1e-15, rtol=ROOT_RTOL, maxiter=200))
            except (ValueError, RuntimeError) as exc:
                raise ConvergenceError(f"Extremum search failed in [{left:.6f}, {right:.6f}]: {exc}") from exc

    minima, maxima = [], []
    for root in roots:
        curvature = (slope(root + 1e-6) - slope(root - 1e-6)) / 2e-6
        if abs(slope(root)) > 1e-10:
            logger.warning(f"Extremum at x={root:.6f} only resolved to |V'|={abs(slope(root)):.2e}")
        (minima if curvature > 0 else maxima).append(root)
    return minima, maxima


def analyze_double_well(potential: FourierPotential) -> WellGeometry:
    """
    Extrema, depths and asymmetry of a double-well potential.

    Xi = 1 - (V(x_max) - V(x_min_1)) / (V(x_max) - V(x_min_2)); zero for a
    symmetric well, negative when the left well is the deeper one.

    Raises:
        NotADoubleWellError: Unless there are exactly two minima around one maximum
    """
    minima, maxima = find_extrema(potential)
    if len(minima) != 2 or len(maxima) != 1 or not (minima[0] < maxima[0] < minima[1]):
        raise NotADoubleWellError(minima, maxima)

    x1, x2 = minima
    xm = maxima[0]
    v_top = evaluate(potential, xm)
    left = v_top - evaluate(potential, x1)
    right = v_top - evaluate(potential, x2)
    if not (left > 0 and right > 0):
        raise NotADoubleWellError(minima, maxima)
    xi = 1.0 - left / right
    return WellGeometry(x1, x2, xm, left, right, xi)


# =========================================================================
# OPERATORS AND SPECTRUM
# =========================================================================

def function_of_x(space: FockSpace, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """f(x) on the truncated space via the eigendecomposition of x."""
    x, _ = quadratures(space)
    nodes, vectors = linalg.eigh(np.asarray(x.matrix))
    return (vectors * f(nodes)) @ vectors.conj().T


def potential_operator(potential: FourierPotential, space: FockSpace) -> OscillatorOperator:
    """Fourier part sum_n B_n cos(k_n x + Phi_n) as an operator."""
    matrix = function_of_x(space, lambda nodes: fourier_only(potential, nodes))
    return OscillatorOperator(space, 0.5 * (matrix + matrix.conj().T), hermitian=True)


def harmonic_operator(potential: FourierPotential, space: FockSpace) -> OscillatorOperator:
    """H_0 = (delta/2)(x^2 + p^2) = delta (n + 1/2), exact on every retained level."""
    levels = np.arange(space.dim, dtype=float)
    return OscillatorOperator(space, np.diag(potential.delta * (levels + 0.5)), hermitian=True)


def hamiltonian(potential: FourierPotential, space: FockSpace) -> OscillatorOperator:
    """H_sim = H_0 + V_fourier(x)."""
    return harmonic_operator(potential, space) + potential_operator(potential, space)


def _diagonalize(potential: FourierPotential, space: FockSpace):
    matrix = np.asarray(hamiltonian(potential, space).matrix)
    return linalg.eigh(0.5 * (matrix + matrix.conj().T))


def spectrum(potential: FourierPotential, space: FockSpace, check_levels: int = 10) -> Spectrum:
    """
    Eigendecomposition of H_sim, verified against a cutoff 20 levels larger.

    Raises:
        ConvergenceError: If any of the lowest check_levels eigenvalues moves
            by more than 1e-8 (in units of delta) when the cutoff grows by 20
    """
    energies, vectors = _diagonalize(potential, space)
    larger, _ = _diagonalize(potential, FockSpace(space.cutoff + 20))
    count = min(check_levels, space.dim // 2)
    unit = abs(potential.delta) if potential.delta else 1.0
    shift = float(np.max(np.abs(energies[:count] - larger[:count]))) / unit
    if shift > 1e-8:
        raise ConvergenceError(
            f"Spectrum not converged at cutoff {space.cutoff}: lowest {count} levels "
            f"shift by {shift:.2e} delta; increase the cutoff"
        )
    return Spectrum(energies, vectors, space)
