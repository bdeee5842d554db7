"""
TGIFS compiler: FourierPotential -> BQSP gate program -> pulse schedule.

Program primitives are stored in application (time) order: the first
element acts first. Operator products written in the usual right-to-left
order are reversed when emitted.
"""

from dataclasses import dataclass
import math
from typing import List, Optional, Tuple, Union

from shared import get_logger
from shared.config_loader import get_hardware

from .potential import FourierPotential, FourierTerm

logger = get_logger("compiler")

TWO_PI = 2.0 * math.pi

# The cosine built from D(sigma_x alpha) acts on the quadrature at phase
# arg(alpha) + pi/2; the evolution SDDs carry a -pi/2 offset so that step k
# acts on x_I(k dt) = x cos(zeta) + p sin(zeta).
QUADRATURE_OFFSET = -math.pi / 2

DETUNING_ADVISORY = 0.5


# =========================================================================
# PRIMITIVES
# =========================================================================

@dataclass(frozen=True)
class SDD:
    """State-dependent displacement D(sigma_x alpha), optional laser detuning (rad/s)."""

    alpha: complex
    detuning: float = 0.0
    kind = "SDD"

    def __post_init__(self):
        alpha = complex(self.alpha)
        if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
            raise ValueError("SDD displacement must be finite")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class SQRX:
    """Carrier rotation R_x(angle)."""

    angle: float
    kind = "SQRX"


@dataclass(frozen=True)
class SQRZ:
    """Frame shift R_z(angle); zero duration."""

    angle: float
    kind = "SQRZ"


@dataclass(frozen=True)
class QubitPrep:
    basis: str = "down"
    kind = "PREP"


@dataclass(frozen=True)
class MidCircuitMeasure:
    """Projective qubit measurement keeping only the given outcome."""

    keep: str = "down"
    kind = "MEAS"


Primitive = Union[SDD, SQRX, SQRZ, QubitPrep, MidCircuitMeasure]


@dataclass(frozen=True)
class GateProgram:
    """
    Compiled primitive sequence.

    Layout: init block (prep, initialization sequence, measure) of
    init_length primitives, then K steps of step_length primitives each,
    then the final measurement.
    """

    primitives: Tuple[Primitive, ...]
    K: int
    dt: float
    potential_hash: str
    init_length: int
    step_length: int

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        expected = self.init_length + self.K * self.step_length + 1
        if len(self.primitives) != expected:
            raise ValueError(
                f"Program metadata inconsistent: {len(self.primitives)} primitives, expected {expected}"
            )

    @property
    def init_block(self) -> Tuple[Primitive, ...]:
        return self.primitives[: self.init_length]

    def step_block(self, k: int) -> Tuple[Primitive, ...]:
        start = self.init_length + k * self.step_length
        return self.primitives[start: start + self.step_length]

    @property
    def final_measure(self) -> MidCircuitMeasure:
        return self.primitives[-1]

    def count(self, kind: str) -> int:
        return sum(1 for p in self.primitives if p.kind == kind)

    @property
    def evolution_sdd_count(self) -> int:
        return sum(1 for k in range(self.K) for p in self.step_block(k) if p.kind == "SDD")


@dataclass(frozen=True)
class HardwareProfile:
    """Rabi frequencies (rad/s), motional dephasing rate (1/s), measurement time (s)."""

    omega: float
    omega0: float
    gamma_phi: float
    measure_duration: float = 50e-6

    def __post_init__(self):
        if not (self.omega > 0 and self.omega0 > 0):
            raise ValueError("Rabi frequencies must be positive")
        if self.gamma_phi < 0:
            raise ValueError("Dephasing rate must be nonnegative")
        if self.measure_duration < 0:
            raise ValueError("Measurement duration must be nonnegative")

    @classmethod
    def default(cls) -> "HardwareProfile":
        hw = get_hardware()
        return cls(hw["omega"], hw["omega0"], hw["gamma_phi"])


@dataclass(frozen=True)
class ScheduleEntry:
    """
    One timed primitive.

    Laser phases: (phi_r, phi_b) for the red/blue sidebands with
    phi_s = (phi_r + phi_b)/2 and phi_m = (phi_b - phi_r)/2. step_start is
    the start time of the enclosing Trotter step (the detuning phase
    reference), or None outside the evolution block.
    """

    primitive: Primitive
    start: float
    duration: float
    phi_r: float = 0.0
    phi_b: float = 0.0
    frame: float = 0.0
    step_start: Optional[float] = None

    @property
    def phi_s(self) -> float:
        return 0.5 * (self.phi_r + self.phi_b)

    @property
    def phi_m(self) -> float:
        return 0.5 * (self.phi_b - self.phi_r)

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class PulseSchedule:
    entries: Tuple[ScheduleEntry, ...]
    program: GateProgram

    @property
    def total_duration(self) -> float:
        return self.entries[-1].end if self.entries else 0.0

    def step_entries(self, k: int) -> Tuple[ScheduleEntry, ...]:
        start = self.program.init_length + k * self.program.step_length
        return self.entries[start: start + self.program.step_length]

    def evolution_duration(self) -> float:
        return sum(e.duration for k in range(self.program.K) for e in self.step_entries(k))


@dataclass(frozen=True)
class TrigGateParams:
    """Gate parameters for one Fourier term at one step."""

    alpha: complex
    theta: float
    phi: float
    zeta: float

    @property
    def alpha0(self) -> float:
        return abs(self.alpha)


# =========================================================================
# PARAMETER MAP
# =========================================================================

def trig_gate_params(
    term: Union[FourierTerm, Tuple[int, float, float]],
    k: int,
    dt: float,
    lam: float,
    delta: float,
) -> TrigGateParams:
    """
    Map a Fourier term at step k to trigonometric-gate parameters.

    alpha0 = pi n / (sqrt2 lam), zeta = k delta dt (mod 2 pi), theta = B_n dt,
    phi = Phi_n. The SDD displacement is alpha0 exp(i(zeta - pi/2)).

    Args:
        term: (n, B_n, Phi_n)
        k: Step index
        dt: Trotter step (s)
        lam: Fourier period
        delta: Harmonic frequency (rad/s)

    Returns:
        TrigGateParams
    """
    if not isinstance(term, FourierTerm):
        term = FourierTerm(int(term[0]), float(term[1]), float(term[2]))
    if dt <= 0:
        raise ValueError(f"Trotter step must be positive, got {dt}")
    if k == 0 and abs(delta) * dt > DETUNING_ADVISORY:
        logger.warning(f"delta*dt = {abs(delta) * dt:.3f} rad exceeds {DETUNING_ADVISORY}; Trotter error grows")

    alpha0 = math.pi * term.n / (math.sqrt(2) * lam)
    zeta = math.fmod(k * delta * dt, TWO_PI)
    if zeta < 0:
        zeta += TWO_PI
    alpha = alpha0 * complex(math.cos(zeta + QUADRATURE_OFFSET), math.sin(zeta + QUADRATURE_OFFSET))
    return TrigGateParams(alpha, term.B * dt, term.Phi, zeta)


# =========================================================================
# GATE SYNTHESIS
# =========================================================================

def build_Q(alpha: complex, theta: float, phi: float, detuning: float = 0.0) -> List[Primitive]:
    """
    Q(alpha, theta, phi) = D(-sigma_x alpha) R_phi(-theta) D(sigma_x alpha).

    R_phi(-theta) = R_x(-phi) R_z(-theta) R_x(phi). Returned in application
    order; SQR_X entries are dropped when phi = 0.
    """
    sequence: List[Primitive] = [SDD(alpha, detuning)]
    if phi != 0.0:
        sequence.append(SQRX(phi))
    sequence.append(SQRZ(-theta))
    if phi != 0.0:
        sequence.append(SQRX(-phi))
    sequence.append(SDD(-complex(alpha), detuning))
    return sequence


def build_trig_gate(alpha: complex, theta: float, phi: float, detuning: float = 0.0) -> List[Primitive]:
    """
    G_c = Q(alpha, theta, phi) Q(-alpha, theta, -phi): Q(-alpha, ...) acts first.

    Approximates exp(i theta sigma_z cos(2 sqrt2 alpha0 x_zeta + phi)) up to O(theta^2).
    """
    return build_Q(-complex(alpha), theta, -phi, detuning) + build_Q(alpha, theta, phi, detuning)


def rotation_y(angle: float) -> List[Primitive]:
    """R_y(angle) = R_z(pi/2) R_x(angle) R_z(-pi/2), in application order."""
    return [SQRZ(-math.pi / 2), SQRX(angle), SQRZ(math.pi / 2)]


def initialization_sequence(x0: float) -> List[Primitive]:
    """
    Three-pulse displacement of the wavepacket to position x0.

    R_y(pi/2), D(sigma_x x0/sqrt2), R_y(-pi/2) takes |down>|0> to
    |down>|coherent(x0/sqrt2)> exactly.
    """
    return rotation_y(math.pi / 2) + [SDD(x0 / math.sqrt(2))] + rotation_y(-math.pi / 2)


def compile_evolution(
    potential: FourierPotential,
    dt: float,
    K: int,
    x0: float,
) -> GateProgram:
    """
    Compile K Trotter steps of the potential into a gate program.

    Per step k, one trigonometric gate per Fourier term n = 1..N with
    evolution SDDs detuned by -delta. The program starts with qubit
    preparation, the initialization sequence and a mid-circuit measurement
    keeping |down>, and ends with a second such measurement.

    Args:
        potential: Target potential
        dt: Trotter step (s)
        K: Number of steps (>= 0)
        x0: Initial wavepacket position

    Returns:
        GateProgram
    """
    if K < 0:
        raise ValueError(f"Step count must be nonnegative, got {K}")
    if abs(x0) > potential.lam / 2:
        logger.warning(f"Initial position {x0} lies outside the confinement window +/-{potential.lam / 2:.4f}")

    init = [QubitPrep("down")] + initialization_sequence(x0) + [MidCircuitMeasure("down")]
    detuning = -potential.delta

    steps: List[Primitive] = []
    step_length = 0
    for k in range(K):
        block: List[Primitive] = []
        for term in potential.terms:
            params = trig_gate_params(term, k, dt, potential.lam, potential.delta)
            # |down> is the +1 eigenstate of sigma_z: the kept branch of G_c(alpha, -theta, phi)
            # is exp(-i B dt cos(.)), the forward step of H_sim
            block += build_trig_gate(params.alpha, -params.theta, params.phi, detuning)
        step_length = len(block)
        steps += block

    primitives = init + steps + [MidCircuitMeasure("down")]
    program = GateProgram(tuple(primitives), K, dt, potential.digest(), len(init), step_length)
    logger.debug(
        f"Compiled K={K} dt={dt:.3e}s: {len(primitives)} primitives, "
        f"{program.evolution_sdd_count} evolution SDDs"
    )
    return program


# =========================================================================
# SCHEDULE LOWERING
# =========================================================================

def _sdd_phases(alpha: complex, detuning: float, frame: float, phase_time: float) -> Tuple[float, float]:
    """
    Laser phases (phi_r, phi_b) realizing alpha at the start of its step.

    With phi_s the qubit phase and phi_m the motional phase, the drive
    displaces along i exp(-i(phi_m + delta_L t)); the qubit phase follows
    the accumulated R_z frame.
    """
    phi_s = -frame
    arg = math.atan2(alpha.imag, alpha.real) if alpha != 0 else 0.0
    phi_m = math.fmod(math.pi / 2 - arg - detuning * phase_time, TWO_PI)
    return phi_s - phi_m, phi_s + phi_m


def lower_to_schedule(program: GateProgram, hw: HardwareProfile, delta: float) -> PulseSchedule:
    """
    Assign start times, durations and laser phases to every primitive.

    SDD: tau = 2|alpha|/Omega, detuning as compiled (-delta during evolution,
    0 during initialization). SQR_X: tau = |angle|/Omega0. SQR_Z: zero-duration
    frame update applied to all later pulses. MEAS: hw.measure_duration.
    PREP: zero duration.

    Args:
        program: Compiled program
        hw: Hardware profile
        delta: Harmonic frequency (rad/s), the detuning magnitude

    Returns:
        PulseSchedule
    """
    entries: List[ScheduleEntry] = []
    clock = 0.0
    frame = 0.0
    evolution_start = None
    evolution_range = range(program.init_length, program.init_length + program.K * program.step_length)

    for index, primitive in enumerate(program.primitives):
        in_evolution = index in evolution_range
        step_start = None
        if in_evolution:
            if evolution_start is None:
                evolution_start = clock
            if (index - program.init_length) % program.step_length == 0:
                current_step_start = clock
            step_start = current_step_start

        phi_r = phi_b = 0.0
        if primitive.kind == "SDD":
            duration = 2.0 * abs(primitive.alpha) / hw.omega
            phase_time = (step_start - evolution_start) if in_evolution else 0.0
            phi_r, phi_b = _sdd_phases(primitive.alpha, primitive.detuning, frame, phase_time)
            if primitive.detuning and abs(primitive.detuning) * duration > DETUNING_ADVISORY:
                logger.warning(f"|delta_L| tau = {abs(primitive.detuning) * duration:.3f} rad on SDD {index}")
        elif primitive.kind == "SQRX":
            duration = abs(primitive.angle) / hw.omega0
            # negative angles use a pi-shifted carrier phase
            phi_r = phi_b = -frame + (math.pi if primitive.angle < 0 else 0.0)
        elif primitive.kind == "SQRZ":
            duration = 0.0
            frame += primitive.angle
        elif primitive.kind == "MEAS":
            duration = hw.measure_duration
        else:
            duration = 0.0

        entries.append(ScheduleEntry(primitive, clock, duration, phi_r, phi_b, frame, step_start))
        clock += duration

    schedule = PulseSchedule(tuple(entries), program)
    logger.debug(
        f"Lowered {len(entries)} primitives: total {schedule.total_duration * 1e3:.4f} ms, "
        f"evolution {schedule.evolution_duration() * 1e3:.4f} ms (delta={delta:.6g} rad/s)"
    )
    return schedule
