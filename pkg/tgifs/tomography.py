"""
Measurement-chain emulation: characteristic-function sampling with
projection noise, Hermitian completion, Wigner reconstruction and the
two <x> estimators.

chi(beta) = <D(beta)>, beta = u + i v. With gamma = (x + i p)/sqrt2,
    W(x, p) = 1/(2 pi^2) sum chi(u + i v) exp(i sqrt2 (p u - x v)) du dv
so that sum W dx dp = chi(0).
"""

from dataclasses import dataclass, field, replace
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from shared import get_logger
from shared.config_loader import get_tomography
from shared.errors import FitError, GridError

from .engine import sdd_unitary
from .hilbert import (
    PAULI,
    HybridState,
    displacement,
    expectation,
    quadratures,
    qubit_rotation,
    reduced_oscillator,
)

logger = get_logger("tomography")

SQRT2 = math.sqrt(2.0)
DUPLICATE_TOL = 1e-12
GRID_TOL = 1e-9
IMAG_RESIDUAL_LIMIT = 1e-6

SCAN_FIELDS = ("re_beta", "im_beta", "re_chi", "im_chi", "shots_re", "shots_im")


# =========================================================================
# TYPES
# =========================================================================

@dataclass(frozen=True)
class ScanPoint:
    """One measured chi value. shots = 0 marks a noiseless (exact) value."""

    beta: complex
    re: float
    im: float
    shots_re: int = 0
    shots_im: int = 0

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @property
    def sigma(self) -> float:
        """Combined projection-noise standard deviation of the complex value."""
        var = 0.0
        if self.shots_re:
            var += max(1.0 - self.re ** 2, 0.0) / self.shots_re
        if self.shots_im:
            var += max(1.0 - self.im ** 2, 0.0) / self.shots_im
        return math.sqrt(var)


@dataclass(frozen=True, eq=False)
class CharacteristicScan:
    """Sampled chi(beta) points with optional measured background."""

    points: Tuple[ScanPoint, ...]
    kind: str = "grid"
    background: Optional[complex] = None
    meta: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("line", "grid"):
            raise ValueError(f"Unknown scan kind: {self.kind}")
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def betas(self) -> np.ndarray:
        return np.array([p.beta for p in self.points], dtype=complex)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points], dtype=complex)

    @property
    def noiseless(self) -> bool:
        return all(p.shots_re == 0 and p.shots_im == 0 for p in self.points)

    def rows(self) -> List[Tuple]:
        """Rows for the re_beta,im_beta,re_chi,im_chi,shots_re,shots_im CSV."""
        return [(p.beta.real, p.beta.imag, p.re, p.im, p.shots_re, p.shots_im) for p in self.points]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]], kind: str = "grid") -> "CharacteristicScan":
        points = [
            ScanPoint(complex(r[0], r[1]), float(r[2]), float(r[3]), int(r[4]), int(r[5]))
            for r in rows
        ]
        return cls(tuple(points), kind)


@dataclass(frozen=True, eq=False)
class WignerGrid:
    """W(x, p) on uniform axes; values[i, j] = W(x_axis[i], p_axis[j])."""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    imag_residual: float = 0.0

    @property
    def dx(self) -> float:
        return float(self.x_axis[1] - self.x_axis[0])

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0])

    def total(self) -> float:
        return float(np.sum(self.values) * self.dx * self.dp)

    def peak(self) -> Tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.x_axis[i]), float(self.p_axis[j])


@dataclass(frozen=True)
class TwoPointEstimate:
    """2PFD <x> estimate; bias is |noiseless 2PFD - exact <x>| when a model state was given."""

    value: float
    noiseless: Optional[float] = None
    bias: Optional[float] = None

    def __float__(self) -> float:
        return self.value


# =========================================================================
# SCAN PLANS
# =========================================================================

def line_betas(im_max: Optional[float] = None, points: Optional[int] = None) -> np.ndarray:
    """Line scan along Im[beta] from 0 to im_max."""
    tomo = get_tomography()
    im_max = float(tomo.get("line_scan_max", 5.0)) if im_max is None else im_max
    points = int(tomo.get("line_scan_points", 50)) if points is None else points
    return 1j * np.linspace(0.0, im_max, points)


def grid_betas(
    re_max: Optional[float] = None,
    re_points: Optional[int] = None,
    im_max: Optional[float] = None,
    im_points: Optional[int] = None,
) -> np.ndarray:
    """Half-plane grid: Re[beta] in [-re_max, re_max], Im[beta] in [0, im_max]."""
    tomo = get_tomography()
    re_max = float(tomo.get("grid_re_max", 4.0)) if re_max is None else re_max
    re_points = int(tomo.get("grid_re_points", 21)) if re_points is None else re_points
    im_max = float(tomo.get("grid_im_max", 4.0)) if im_max is None else im_max
    im_points = int(tomo.get("grid_im_points", 11)) if im_points is None else im_points
    u, v = np.meshgrid(np.linspace(-re_max, re_max, re_points), np.linspace(0.0, im_max, im_points), indexing="ij")
    return (u + 1j * v).reshape(-1)


# =========================================================================
# CHARACTERISTIC FUNCTION
# =========================================================================

def chi_point(state: HybridState, beta: complex) -> complex:
    """
    chi(beta) = Tr(rho_osc D(beta)) from the direct operator expectation.

    Raises:
        TruncationOverflowError: If D(beta) leaks out of the truncated space
    """
    if beta == 0:
        return complex(1.0, 0.0)
    rho = reduced_oscillator(state)
    return complex(np.trace(rho @ np.asarray(displacement(state.space, beta).matrix)))


def chi_protocol(state: HybridState, beta: complex) -> Tuple[float, float]:
    """
    Qubit-readout emulation: <sigma_z> after D(sigma_x beta/2) on |down> gives
    Re chi; prepending R_x(pi/2) gives Im chi.

    Returns:
        (<sigma_z> for the real part, <sigma_z> for the imaginary part)
    """
    space = state.space
    n = space.dim
    rho_osc = reduced_oscillator(state)
    unitary = sdd_unitary(space, beta / 2)
    z = np.kron(np.diag(PAULI["z"]).real, np.ones(n))

    def readout(qubit: np.ndarray) -> float:
        rho = np.kron(np.outer(qubit, qubit.conj()), rho_osc)
        rho = unitary @ rho @ unitary.conj().T
        return float(np.real(np.sum(z * np.diagonal(rho))))

    down = np.array([1.0, 0.0], dtype=complex)
    return readout(down), readout(qubit_rotation("x", math.pi / 2) @ down)


def _point_rng(seed: Optional[int], index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_readout(rng: np.random.Generator, value: float, shots: int) -> float:
    """Shot-noise estimate 2 s/shots - 1 of a sigma_z expectation, s ~ Binomial(shots, (1 + value)/2)."""
    p_success = min(max(0.5 * (1.0 + value), 0.0), 1.0)
    return 2.0 * rng.binomial(shots, p_success) / shots - 1.0


def sample_scan(
    state: HybridState,
    betas: Sequence[complex],
    shots_per_point: Optional[int],
    seed: Optional[int] = None,
    kind: str = "grid",
    background: Optional[complex] = None,
) -> CharacteristicScan:
    """
    Sample chi at each beta with binomial projection noise.

    Each estimate is 2 successes/shots - 1 with successes ~ Binomial(shots,
    (1 + true)/2); point i draws from the seed sequence (seed, i), so scans
    are deterministic for a fixed seed. shots_per_point=None gives the exact
    values with shots recorded as 0.

    Raises:
        ValueError: If shots_per_point < 1
    """
    if shots_per_point is not None and shots_per_point < 1:
        raise ValueError(f"shots_per_point must be >= 1, got {shots_per_point}")

    points = []
    for index, beta in enumerate(betas):
        beta = complex(beta)
        if shots_per_point is None:
            chi = chi_point(state, beta)
            points.append(ScanPoint(beta, chi.real, chi.imag))
            continue
        re_true, im_true = (1.0, 0.0) if beta == 0 else chi_protocol(state, beta)
        rng = _point_rng(seed, index)
        points.append(ScanPoint(
            beta,
            sample_readout(rng, re_true, shots_per_point),
            sample_readout(rng, im_true, shots_per_point),
            shots_per_point,
            shots_per_point,
        ))

    logger.debug(f"Sampled {len(points)} chi points ({kind}, shots={shots_per_point}, seed={seed})")
    return CharacteristicScan(tuple(points), kind, background, {"seed": seed if seed is not None else -1})


def _key(beta: complex) -> Tuple[int, int]:
    return int(round(beta.real / DUPLICATE_TOL)), int(round(beta.imag / DUPLICATE_TOL))


def complete_hermitian(scan: CharacteristicScan) -> CharacteristicScan:
    """
    Append chi(-beta) = conj(chi(beta)) for every point whose mirror is missing.

    Existing mirrors are kept as measured; pairs differing by more than three
    standard deviations are logged as inconsistent.
    """
    index = {_key(p.beta): p for p in scan.points}
    added = []
    inconsistent = 0
    for p in scan.points:
        if p.beta == 0:
            continue
        mirror_key = _key(-p.beta)
        mirror = index.get(mirror_key)
        if mirror is None:
            q = ScanPoint(-p.beta, p.re, -p.im, p.shots_re, p.shots_im)
            index[mirror_key] = q
            added.append(q)
            continue
        sigma = math.hypot(p.sigma, mirror.sigma)
        if abs(mirror.value - p.value.conjugate()) > max(3.0 * sigma, 1e-10):
            inconsistent += 1
    if inconsistent:
        logger.warning(f"{inconsistent} Hermitian pairs disagree by more than 3 sigma")
    if not added:
        return scan
    return replace(scan, points=scan.points + tuple(added))


# =========================================================================
# WIGNER RECONSTRUCTION
# =========================================================================

def _uniform_axis(values: np.ndarray, name: str) -> Tuple[np.ndarray, float]:
    axis = np.unique(np.round(values / GRID_TOL) * GRID_TOL)
    if len(axis) < 2:
        raise GridError(f"{name} axis needs at least two distinct values")
    steps = np.diff(axis)
    step = float(steps.mean())
    if np.max(np.abs(steps - step)) > GRID_TOL * max(1.0, step) * 10:
        raise GridError(f"{name} axis is not uniform")
    return axis, step


def _padded_axis(axis: np.ndarray, step: float, radius: float) -> Tuple[np.ndarray, int]:
    lo = max(0, math.ceil((axis[0] + radius) / step - 1e-9))
    hi = max(0, math.ceil((radius - axis[-1]) / step - 1e-9))
    padded = axis[0] - lo * step + step * np.arange(len(axis) + lo + hi)
    return padded, lo


def _chi_matrix(
    scan: CharacteristicScan,
    pad_radius: float,
    subtract_background: bool,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
    betas = scan.betas
    values = scan.values
    if subtract_background and scan.background is not None:
        values = values - scan.background
    u_axis, du = _uniform_axis(betas.real, "Re[beta]")
    v_axis, dv = _uniform_axis(betas.imag, "Im[beta]")
    if len(betas) != len(u_axis) * len(v_axis):
        raise GridError(
            f"Scan has {len(betas)} points, a full {len(u_axis)}x{len(v_axis)} grid is required"
        )
    u_pad, u_off = _padded_axis(u_axis, du, pad_radius)
    v_pad, v_off = _padded_axis(v_axis, dv, pad_radius)
    chi = np.zeros((len(u_pad), len(v_pad)), dtype=complex)
    i = np.rint((betas.real - u_axis[0]) / du).astype(int) + u_off
    j = np.rint((betas.imag - v_axis[0]) / dv).astype(int) + v_off
    chi[i, j] = values
    return chi, u_pad, v_pad, du, dv


def _wigner_axes(u_pad: np.ndarray, v_pad: np.ndarray, du: float, dv: float) -> Tuple[np.ndarray, np.ndarray]:
    p_axis = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(len(u_pad), du)) / SQRT2
    x_axis = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(len(v_pad), dv)) / SQRT2
    return x_axis, p_axis


def wigner_direct(chi: np.ndarray, u: np.ndarray, v: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Riemann sum of the Wigner transform on arbitrary (x, p) points; complex result."""
    du, dv = u[1] - u[0], v[1] - v[0]
    e_u = np.exp(1j * SQRT2 * np.outer(p, u))
    e_v = np.exp(-1j * SQRT2 * np.outer(x, v))
    return (e_v @ chi.T @ e_u.T) * du * dv / (2.0 * np.pi ** 2)


def _wigner_fft(chi: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    du, dv = u[1] - u[0], v[1] - v[0]
    m_u, m_v = len(u), len(v)
    k_p = 2.0 * np.pi * np.fft.fftfreq(m_u, du)
    k_x = 2.0 * np.pi * np.fft.fftfreq(m_v, dv)
    # sum_i chi_i e^{i k u_i} = e^{i k u_0} * M * ifft
    over_u = m_u * np.fft.ifft(chi, axis=0) * np.exp(1j * k_p * u[0])[:, None]
    # sum_j e^{-i k v_j} = e^{-i k v_0} * fft
    both = np.fft.fft(over_u, axis=1) * np.exp(-1j * k_x * v[0])[None, :]
    values = np.fft.fftshift(both).T
    return values * du * dv / (2.0 * np.pi ** 2)


def wigner_from_scan(
    scan: CharacteristicScan,
    pad_radius: Optional[float] = None,
    method: str = "fft",
    subtract_background: bool = False,
) -> WignerGrid:
    """
    Reconstruct W(x, p) from a full-plane uniform scan.

    The scan is zero-padded out to |Re[beta]|, |Im[beta]| <= pad_radius and
    transformed by FFT (default) or by the direct sum.

    Raises:
        GridError: If the scan is not a full uniform grid
    """
    if method not in ("fft", "direct"):
        raise ValueError(f"Unknown Wigner method: {method}")
    if pad_radius is None:
        pad_radius = float(get_tomography().get("pad_radius", 10.0))
    chi, u, v, du, dv = _chi_matrix(scan, pad_radius, subtract_background)
    x_axis, p_axis = _wigner_axes(u, v, du, dv)
    if method == "fft":
        values = _wigner_fft(chi, u, v)
    else:
        values = wigner_direct(chi, u, v, x_axis, p_axis)

    residual = float(np.max(np.abs(values.imag)))
    if scan.noiseless and residual > IMAG_RESIDUAL_LIMIT:
        logger.warning(f"Wigner imaginary residual {residual:.2e}; is the scan Hermitian-complete?")
    grid = WignerGrid(x_axis, p_axis, values.real, residual)
    logger.debug(
        f"Wigner grid {len(x_axis)}x{len(p_axis)} ({method}), sum W dx dp = {grid.total():.6f}"
    )
    return grid


# =========================================================================
# MARGINALS
# =========================================================================

def _line_points(scan: CharacteristicScan) -> Tuple[np.ndarray, np.ndarray]:
    full = complete_hermitian(scan)
    betas = full.betas
    if np.any(np.abs(betas.real) > DUPLICATE_TOL):
        raise GridError("Line-scan marginal needs points with Re[beta] = 0")
    order = np.argsort(betas.imag)
    return betas.imag[order], full.values[order]


def prob_x(
    source: Union[WignerGrid, CharacteristicScan],
    pad_radius: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Position distribution P(x).

    From a WignerGrid: P(x) = sum_p W dp. From a line scan along Im[beta]:
    P(x) = 1/(sqrt2 pi) sum chi(i v) exp(-i sqrt2 x v) dv over the mirrored,
    zero-padded line, on the same x axis the Wigner FFT uses.

    Returns:
        (x, P)
    """
    if isinstance(source, WignerGrid):
        return source.x_axis, source.values.sum(axis=1) * source.dp

    if pad_radius is None:
        pad_radius = float(get_tomography().get("pad_radius", 10.0))
    v, chi = _line_points(source)
    v_axis, dv = _uniform_axis(v, "Im[beta]")
    if len(v_axis) != len(v):
        raise GridError("Line scan contains duplicate points")
    v_pad, offset = _padded_axis(v_axis, dv, pad_radius)
    padded = np.zeros(len(v_pad), dtype=complex)
    padded[offset: offset + len(chi)] = chi
    x = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(len(v_pad), dv)) / SQRT2
    P = (np.exp(-1j * SQRT2 * np.outer(x, v_pad)) @ padded) * dv / (SQRT2 * np.pi)
    return x, P.real


# =========================================================================
# <x> ESTIMATORS
# =========================================================================

SLOPE_MODELS = ("cubic", "linear", "line")


def xexpect_slope(
    scan: CharacteristicScan,
    max_im: Optional[float] = None,
    model: str = "cubic",
) -> Tuple[float, float]:
    """
    <x> = (1/sqrt2) d Im[chi] / d Im[beta] at beta = 0.

    Fits Im[chi](v) = m v + c v^3 ("cubic", default) or a straight line
    ("linear") to the points with Re[beta] = 0. The exact anchor chi(0) = 1
    enters both fits with zero variance, which pins the intercept, so the
    linear model reduces to m v. Noisy points are weighted by their
    projection noise.

    Args:
        scan: Scan containing points on the Im[beta] axis
        max_im: Only use points with |Im[beta]| <= max_im
        model: "cubic", "linear" or its alias "line"

    Returns:
        (<x>, one-sigma uncertainty)

    Raises:
        FitError: If fewer than 3 usable points remain
    """
    if model not in SLOPE_MODELS:
        raise ValueError(f"Unknown slope model: {model}")
    usable = [
        p for p in scan.points
        if abs(p.beta.real) <= DUPLICATE_TOL and p.beta.imag != 0
        and (max_im is None or abs(p.beta.imag) <= max_im)
    ]
    if len(usable) < 3:
        raise FitError(f"Slope fit needs at least 3 points on the Im[beta] axis, got {len(usable)}")

    v = np.array([p.beta.imag for p in usable])
    y = np.array([p.im for p in usable])
    design = np.column_stack([v, v ** 3]) if model == "cubic" else v[:, None]
    noisy = all(p.shots_im > 0 for p in usable)
    if noisy:
        sigma = np.array([max(math.sqrt(max(1.0 - p.im ** 2, 0.0) / p.shots_im), 1.0 / p.shots_im) for p in usable])
    else:
        sigma = np.ones_like(v)

    coeffs, _, _, _ = np.linalg.lstsq(design / sigma[:, None], y / sigma, rcond=None)
    normal = np.linalg.inv((design / sigma[:, None]).T @ (design / sigma[:, None]))
    if noisy:
        cov = normal
    else:
        dof = max(len(v) - design.shape[1], 1)
        resid = y - design @ coeffs
        cov = normal * float(resid @ resid) / dof
    slope = float(coeffs[0])
    return slope / SQRT2, math.sqrt(max(float(cov[0, 0]), 0.0)) / SQRT2


def xexpect_2pfd(
    source: Union[HybridState, float, complex],
    h: Optional[float] = None,
    shots: Optional[int] = -1,
    seed: Union[int, np.random.SeedSequence, None] = None,
) -> TwoPointEstimate:
    """
    Two-point finite difference <x> ~ Im[chi(i h)] / (sqrt2 h).

    Args:
        source: Model state, or a measured Im[chi(ih)] (real) / chi(ih) (complex)
        h: Step (default from config, 0.4)
        shots: Shots for the Im[chi] readout; None is noiseless, -1 takes the
            config default (200)
        seed: Seed for the shot noise

    Returns:
        TwoPointEstimate; bias is filled in when a state is given
    """
    tomo = get_tomography()
    h = float(tomo.get("h", 0.4)) if h is None else h
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")

    if not isinstance(source, HybridState):
        im_chi = source.imag if isinstance(source, complex) else float(source)
        return TwoPointEstimate(im_chi / (SQRT2 * h))

    if shots == -1:
        shots = int(tomo.get("shots", 200))
    im_true = chi_point(source, 1j * h).imag
    noiseless = im_true / (SQRT2 * h)
    x, _ = quadratures(source.space)
    bias = abs(noiseless - expectation(x, source).real)
    if shots is None:
        return TwoPointEstimate(noiseless, noiseless, bias)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    _, im_protocol = chi_protocol(source, 1j * h)
    im_sampled = sample_readout(np.random.default_rng(seed), im_protocol, shots)
    return TwoPointEstimate(im_sampled / (SQRT2 * h), noiseless, bias)
