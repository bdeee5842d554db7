"""
Dynamics engine: exact interaction-picture evolution, ideal gate replay and
Lindblad evolution with motional dephasing, plus post-selection.

All results are reported in the interaction frame of H_0 = delta (n + 1/2).
Gate programs already act in that frame (the SDD phases track zeta = k delta dt),
so program-mode evolution needs no final frame transform. EvolutionResult.to_lab
rotates a result back to the lab frame.
"""

from dataclasses import dataclass, field
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, linalg

from shared import get_logger
from shared.config_loader import get_hardware, get_nested, get_numerics
from shared.errors import ExtinctionError, IntegratorToleranceError

from .compiler import GateProgram, HardwareProfile, PulseSchedule, ScheduleEntry, lower_to_schedule
from .hilbert import (
    PAULI,
    QUBIT_LABELS,
    FockSpace,
    HybridState,
    check_tail,
    displacement,
    expectation,
    ladder,
    mean_occupation,
    number,
    purity,
    quadratures,
    qubit_rotation,
    reduced_oscillator,
    replay_tail_tolerance,
    rotated_quadrature,
    tail_mass,
)
from .potential import FourierPotential, hamiltonian

logger = get_logger("engine")

EXTINCTION_WEIGHT = 1e-12
TRACE_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = -1e-8
LOW_ACCEPTANCE = 0.9


# =========================================================================
# TYPES
# =========================================================================

@dataclass(frozen=True)
class NoiseModel:
    """
    Error layers applied by the engine.

    Attributes:
        gamma_phi: Motional dephasing rate (1/s), L = sqrt(gamma_phi) a^dag a
        dephasing: Apply the dephasing channel
        trotter: Gate-level (program) evolution instead of exact H_sim evolution
        detuned_sdd: Integrate the phase sweep of detuned SDD pulses
    """

    gamma_phi: float = 0.0
    dephasing: bool = False
    trotter: bool = False
    detuned_sdd: bool = False

    def __post_init__(self):
        if self.gamma_phi < 0:
            raise ValueError(f"gamma_phi must be nonnegative, got {self.gamma_phi}")

    @property
    def effective_gamma(self) -> float:
        return self.gamma_phi if self.dephasing else 0.0

    @classmethod
    def from_config(cls) -> "NoiseModel":
        return cls(
            gamma_phi=get_hardware()["gamma_phi"],
            dephasing=bool(get_nested("noise.dephasing", True)),
            trotter=bool(get_nested("noise.trotter", True)),
            detuned_sdd=bool(get_nested("noise.detuned_sdd", True)),
        )

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Checkpointed states with the accumulated post-selection acceptance."""

    times: Tuple[float, ...]
    states: Tuple[HybridState, ...]
    acceptance_probability: Tuple[float, ...]
    frame: str = "interaction"
    meta: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.times) == len(self.states) == len(self.acceptance_probability)):
            raise ValueError("EvolutionResult fields must have equal lengths")
        if self.frame not in ("interaction", "lab"):
            raise ValueError(f"Unknown frame: {self.frame}")

    def __len__(self) -> int:
        return len(self.times)

    def x_expect(self) -> np.ndarray:
        if not self.states:
            return np.array([])
        x, _ = quadratures(self.states[0].space)
        return np.array([expectation(x, s).real for s in self.states])

    def x_lab(self, delta: float) -> np.ndarray:
        """
        <x> in the lab frame of H_0 = delta (n + 1/2), i.e. the interaction-frame
        expectation of x_{delta t}, since e^{i H_0 t} a e^{-i H_0 t} = a e^{-i delta t}.
        Both frames agree at multiples of 2 pi / delta.
        """
        if not self.states:
            return np.array([])
        if self.frame == "lab":
            return self.x_expect()
        space = self.states[0].space
        return np.array([
            expectation(rotated_quadrature(space, delta * t), s).real
            for t, s in zip(self.times, self.states)
        ])

    def to_lab(self, delta: float) -> "EvolutionResult":
        """The same checkpoints with every state rotated back by e^{-i H_0 t}."""
        if self.frame == "lab":
            return self
        states = []
        for t, state in zip(self.times, self.states):
            rotation = np.diag(np.exp(-1j * delta * np.arange(state.space.dim) * t))
            data = _apply_oscillator(rotation, np.array(state.data), state.is_pure)
            states.append(HybridState(state.space, state.kind, data, validate=False))
        return EvolutionResult(self.times, tuple(states), self.acceptance_probability, "lab", dict(self.meta))

    def n_bar(self) -> np.ndarray:
        return np.array([mean_occupation(s) for s in self.states])

    def purity(self) -> np.ndarray:
        return np.array([purity(s) for s in self.states])

    def reduced(self, index: int) -> np.ndarray:
        """Oscillator density matrix at one checkpoint."""
        return reduced_oscillator(self.states[index])

    def trace_rows(self) -> List[Tuple[float, float, float, float]]:
        """Rows for the t_s,x_expect,n_bar,acceptance CSV."""
        return list(zip(self.times, self.x_expect(), self.n_bar(), self.acceptance_probability))


TRACE_FIELDS = ("t_s", "x_expect", "n_bar", "acceptance")


# =========================================================================
# ARRAY HELPERS
# =========================================================================

def _apply(unitary: np.ndarray, data: np.ndarray, pure: bool) -> np.ndarray:
    if pure:
        return unitary @ data
    return unitary @ data @ unitary.conj().T


def _apply_oscillator(unitary: np.ndarray, data: np.ndarray, pure: bool) -> np.ndarray:
    """Apply identity (x) U to both qubit blocks."""
    n = unitary.shape[0]
    if pure:
        return (data.reshape(2, n) @ unitary.T).reshape(-1)
    blocks = data.reshape(2, n, 2, n).transpose(0, 2, 1, 3)
    blocks = unitary @ blocks @ unitary.conj().T
    return blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def _qubit_unitary(space: FockSpace, matrix: np.ndarray) -> np.ndarray:
    return np.kron(matrix, np.eye(space.dim))


def _apply_qubit(matrix: np.ndarray, data: np.ndarray, pure: bool) -> np.ndarray:
    """Apply a 2x2 qubit gate (x) I without forming the hybrid matrix."""
    n = data.shape[0] // 2
    if pure:
        return (matrix @ data.reshape(2, n)).reshape(-1)
    rho = np.einsum("ab,bjck,dc->ajdk", matrix, data.reshape(2, n, 2, n), matrix.conj())
    return rho.reshape(2 * n, 2 * n)


def _displacement_rotated(space: FockSpace, amplitude: complex) -> np.ndarray:
    """
    D(amplitude) from the cached real-amplitude matrix.

    D(r e^{i t}) = e^{i t n} D(r) e^{-i t n}, so only |amplitude| hits the cache.
    """
    r = abs(amplitude)
    base = np.asarray(displacement(space, r).matrix)
    if r == 0:
        return base
    phases = np.exp(1j * np.angle(amplitude) * np.arange(space.dim))
    return (phases[:, None] * base) * phases.conj()[None, :]


def sdd_unitary(space: FockSpace, alpha: complex) -> np.ndarray:
    """
    D(sigma_x alpha) on the hybrid space.

    Built in the sigma_x eigenbasis: |+><+| (x) D(alpha) + |-><-| (x) D(-alpha).
    """
    plus = _displacement_rotated(space, alpha)
    minus = _displacement_rotated(space, -alpha)
    even = 0.5 * (plus + minus)
    odd = 0.5 * (plus - minus)
    return np.block([[even, odd], [odd, even]])


def detuned_amplitude(alpha: complex, duration: float, omega: float, start: float, stop: float) -> complex:
    """
    Effective displacement of a uniformly driven SDD over [start, stop] of the pulse.

    The drive alpha/duration carries the phase exp(i omega (s + offset)); the
    caller folds the pulse offset into start/stop. Conditional displacements
    along sigma_x compose up to a global phase, so this is exact.
    """
    rate = alpha / duration
    if omega == 0:
        return rate * (stop - start)
    return rate * np.exp(1j * omega * start) * (np.exp(1j * omega * (stop - start)) - 1.0) / (1j * omega)


def _reset_qubit(space: FockSpace, data: np.ndarray, pure: bool, basis: str) -> np.ndarray:
    """Reset the qubit to a basis state, keeping the oscillator marginal."""
    n = space.dim
    target = np.zeros(2, dtype=complex)
    target[QUBIT_LABELS[basis]] = 1.0
    if not pure:
        osc = np.einsum("aiaj->ij", data.reshape(2, n, 2, n))
        return np.kron(np.outer(target, target), osc)
    blocks = data.reshape(2, n)
    norms = np.linalg.norm(blocks, axis=1)
    lead = int(np.argmax(norms))
    osc = blocks[lead] / norms[lead]
    other = 1 - lead
    if norms[other] > 1e-10 and abs(abs(np.vdot(osc, blocks[other])) - norms[other]) > 1e-10:
        raise ValueError("Qubit reset of an entangled pure state needs density-matrix evolution")
    return np.kron(target, osc)


def _project(space: FockSpace, data: np.ndarray, pure: bool, keep: str) -> Tuple[np.ndarray, float]:
    n = space.dim
    index = QUBIT_LABELS[keep]
    mask = np.zeros(2 * n)
    mask[index * n:(index + 1) * n] = 1.0
    if pure:
        projected = data * mask
        weight = float(np.vdot(projected, projected).real)
    else:
        projected = data * np.outer(mask, mask)
        weight = float(np.trace(projected).real)
    if weight < EXTINCTION_WEIGHT:
        raise ExtinctionError(weight, keep)
    if pure:
        return projected / math.sqrt(weight), weight
    return projected / weight, weight


def postselect(state: HybridState, keep: str = "down") -> Tuple[HybridState, float]:
    """
    Project onto |keep> (x) I and renormalize.

    Returns:
        (post-selected state, weight before renormalization)

    Raises:
        ExtinctionError: If the kept weight is below 1e-12
    """
    data, weight = _project(state.space, np.array(state.data), state.is_pure, keep)
    return HybridState(state.space, state.kind, data, validate=False), weight


def _state(space: FockSpace, data: np.ndarray, pure: bool) -> HybridState:
    return HybridState(space, "pure" if pure else "density", data, validate=False)


def _checkpoints(program: GateProgram, checkpoints: Optional[Sequence[int]]) -> List[int]:
    if checkpoints is None:
        return list(range(program.K + 1))
    checkpoints = sorted(set(int(k) for k in checkpoints))
    if checkpoints and (checkpoints[0] < 0 or checkpoints[-1] > program.K):
        raise ValueError(f"Checkpoints must lie in [0, {program.K}], got {checkpoints}")
    return checkpoints


def _check_times(times: Sequence[float]) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("Output times must be nonnegative and ascending")
    return times


def _frame_phases(potential: FourierPotential, space: FockSpace, t: float) -> np.ndarray:
    return np.exp(1j * potential.delta * (np.arange(space.dim) + 0.5) * t)


def _warn_acceptance(acceptance: Sequence[float]):
    if acceptance and min(acceptance) < LOW_ACCEPTANCE:
        logger.warning(f"Post-selection acceptance dropped to {min(acceptance):.4f}")


class _ReplayTail:
    """Tail check for Trotterized replays: replay limit enforced, strict limit reported once."""

    def __init__(self):
        self.strict = float(get_nested("numerics.tail_tolerance", 1e-8))
        self.limit = replay_tail_tolerance()
        self.worst = 0.0

    def __call__(self, state: HybridState) -> HybridState:
        check_tail(state, self.limit)
        self.worst = max(self.worst, tail_mass(state))
        return state

    def report(self):
        if self.worst >= self.strict:
            logger.warning(
                f"Replay tail population reached {self.worst:.3e} (strict limit {self.strict:g}, "
                f"replay limit {self.limit:g})"
            )


# =========================================================================
# EXACT EVOLUTION
# =========================================================================

def exact_interaction_evolve(
    potential: FourierPotential,
    psi0: HybridState,
    times: Sequence[float],
) -> EvolutionResult:
    """
    Exact interaction-picture evolution U_I(0, T) = e^{+i H_0 T} e^{-i H_sim T}.

    Args:
        potential: Target potential (H_sim = H_0 + V_fourier acting on the oscillator)
        psi0: Initial hybrid state (pure or density)
        times: Ascending nonnegative output times (s)

    Returns:
        EvolutionResult with acceptance 1 at every time
    """
    times = _check_times(times)
    space = psi0.space
    energies, vectors = linalg.eigh(np.asarray(hamiltonian(potential, space).matrix))
    data0 = np.array(psi0.data)

    states = []
    for t in times:
        unitary = (_frame_phases(potential, space, t)[:, None] * vectors) * np.exp(-1j * energies * t)
        unitary = unitary @ vectors.conj().T
        data = _apply_oscillator(unitary, data0, psi0.is_pure)
        state = HybridState(space, psi0.kind, data)
        check_tail(state)
        states.append(state)

    logger.debug(f"Exact evolution: {len(times)} output times up to {times[-1] if len(times) else 0:.4e} s")
    return EvolutionResult(tuple(float(t) for t in times), tuple(states), tuple(1.0 for _ in times))


# =========================================================================
# GATE-LEVEL EVOLUTION
# =========================================================================

def _apply_ideal(space: FockSpace, primitive, data: np.ndarray, pure: bool) -> np.ndarray:
    if primitive.kind == "SDD":
        return _apply(sdd_unitary(space, primitive.alpha), data, pure)
    axis = "x" if primitive.kind == "SQRX" else "z"
    return _apply_qubit(qubit_rotation(axis, primitive.angle), data, pure)


def gate_evolve(
    program: GateProgram,
    psi0: HybridState,
    checkpoints: Optional[Sequence[int]] = None,
) -> EvolutionResult:
    """
    Replay a program with ideal primitives.

    The final measurement is applied to a copy of the state at each
    checkpoint (after k steps); the trajectory itself continues unprojected.
    Checkpoint k is reported at time k * dt.

    Raises:
        ExtinctionError: If a post-selection keeps no population
    """
    space = psi0.space
    pure = psi0.is_pure
    data = np.array(psi0.data)
    wanted = _checkpoints(program, checkpoints)

    def run(primitive, data, weight):
        if primitive.kind == "PREP":
            return _reset_qubit(space, data, pure, primitive.basis), weight
        if primitive.kind == "MEAS":
            data, w = _project(space, data, pure, primitive.keep)
            return data, weight * w
        return _apply_ideal(space, primitive, data, pure), weight

    init_weight = 1.0
    for primitive in program.init_block:
        data, init_weight = run(primitive, data, init_weight)

    keep = program.final_measure.keep
    times, states, acceptance = [], [], []
    tail_check = _ReplayTail()

    def record(k, data):
        projected, w = _project(space, data, pure, keep)
        state = _state(space, projected, pure)
        tail_check(state)
        times.append(k * program.dt)
        states.append(state)
        acceptance.append(init_weight * w)

    if 0 in wanted:
        record(0, data)
    for k in range(program.K):
        for primitive in program.step_block(k):
            data, _ = run(primitive, data, 1.0)
        if k + 1 in wanted:
            record(k + 1, data)

    _warn_acceptance(acceptance)
    tail_check.report()
    logger.debug(f"Gate replay: K={program.K}, {len(states)} checkpoints, init acceptance {init_weight:.6f}")
    meta = {"init_acceptance": init_weight, "max_tail": tail_check.worst}
    return EvolutionResult(tuple(times), tuple(states), tuple(acceptance), meta=meta)


# =========================================================================
# LINDBLAD EVOLUTION
# =========================================================================

class _Propagator:
    """
    Density-matrix propagation under piecewise-constant generators with
    dephasing L = sqrt(gamma) a^dag a.

    "split": Strang splitting, dephasing half steps around the unitary part,
    substeps no longer than max_substep. Dephasing is exact elementwise.
    "rk45": scipy solve_ivp on the matrix master equation.
    """

    def __init__(self, space: FockSpace, gamma: float, integrator: str, max_substep: float):
        if integrator not in ("split", "rk45"):
            raise ValueError(f"Unknown Lindblad integrator: {integrator}")
        self.space = space
        self.gamma = gamma
        self.integrator = integrator
        self.max_substep = max_substep
        numerics = get_numerics()
        self.rtol = float(numerics.get("rk_rtol", 1e-9))
        self.atol = float(numerics.get("rk_atol", 1e-11))
        levels = np.arange(space.dim)
        self._gap2 = np.tile((levels[:, None] - levels[None, :]) ** 2, (2, 2)).astype(float)
        n_op = np.kron(np.eye(2), np.asarray(number(space).matrix))
        self._n = n_op
        self._n2 = n_op @ n_op

    def substeps(self, duration: float) -> int:
        if self.gamma == 0 or duration <= 0:
            return 1
        return max(1, math.ceil(duration / self.max_substep - 1e-12))

    def dephase(self, rho: np.ndarray, duration: float) -> np.ndarray:
        if self.gamma == 0 or duration <= 0:
            return rho
        return rho * np.exp(-0.5 * self.gamma * duration * self._gap2)

    def _rhs(self, hamiltonian_at: Callable[[float], Optional[np.ndarray]]):
        dim = self._n.shape[0]

        def rhs(t, y):
            rho = y.reshape(dim, dim)
            out = self.gamma * (self._n @ rho @ self._n - 0.5 * (self._n2 @ rho + rho @ self._n2))
            H = hamiltonian_at(t)
            if H is not None:
                out = out - 1j * (H @ rho - rho @ H)
            return out.reshape(-1)

        return rhs

    def integrate(self, rho: np.ndarray, hamiltonian_at: Callable[[float], Optional[np.ndarray]], duration: float) -> np.ndarray:
        if duration <= 0:
            return rho
        solution = integrate.solve_ivp(
            self._rhs(hamiltonian_at),
            (0.0, duration),
            rho.reshape(-1).astype(complex),
            method="RK45",
            rtol=self.rtol,
            atol=self.atol,
        )
        if not solution.success:
            raise IntegratorToleranceError(float("nan"), float("nan"))
        return solution.y[:, -1].reshape(rho.shape)

    def check(self, rho: np.ndarray, time: float, expected_trace: float = 1.0):
        drift = abs(float(np.trace(rho).real) - expected_trace)
        min_eig = float(np.min(linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
        if drift > TRACE_TOLERANCE or min_eig < POSITIVITY_TOLERANCE:
            raise IntegratorToleranceError(drift, min_eig, time)


def _lindblad_potential(
    potential: FourierPotential,
    rho0: HybridState,
    times: np.ndarray,
    propagator: _Propagator,
) -> EvolutionResult:
    space = rho0.space
    H_osc = np.asarray(hamiltonian(potential, space).matrix)
    energies, vectors = linalg.eigh(H_osc)
    H_full = np.kron(np.eye(2), H_osc)
    rho = rho0.density()
    clock = 0.0
    unitaries: Dict[float, np.ndarray] = {}
    states = []

    for t in times:
        span = t - clock
        if span > 0:
            if propagator.integrator == "rk45":
                rho = propagator.integrate(rho, lambda s: H_full, span)
            else:
                count = propagator.substeps(span)
                h = span / count
                if h not in unitaries:
                    unitaries[h] = (vectors * np.exp(-1j * energies * h)) @ vectors.conj().T
                for _ in range(count):
                    rho = propagator.dephase(rho, 0.5 * h)
                    rho = _apply_oscillator(unitaries[h], rho, False)
                    rho = propagator.dephase(rho, 0.5 * h)
            clock = t
        propagator.check(rho, t)
        rho_i = _apply_oscillator(np.diag(_frame_phases(potential, space, t)), rho, False)
        state = _state(space, rho_i, False)
        check_tail(state)
        states.append(state)

    return EvolutionResult(tuple(float(t) for t in times), tuple(states), tuple(1.0 for _ in times))


def _sdd_hamiltonian(space: FockSpace, alpha: complex, duration: float, omega: float, offset: float):
    """H(s) = i sigma_x (f(s) a^dag - f(s)* a) with f(s) = (alpha/duration) e^{i omega (s + offset)}."""
    a, adag = ladder(space)
    a = np.kron(PAULI["x"], np.asarray(a.matrix))
    adag = np.kron(PAULI["x"], np.asarray(adag.matrix))
    rate = alpha / duration

    def at(s):
        f = rate * np.exp(1j * omega * (s + offset))
        return 1j * (f * adag - np.conj(f) * a)

    return at


def _lindblad_program(
    schedule: PulseSchedule,
    rho0: HybridState,
    checkpoints: List[int],
    propagator: _Propagator,
    detuned_sdd: bool,
) -> EvolutionResult:
    program = schedule.program
    space = rho0.space
    rho = rho0.density()

    def sdd(rho, entry: ScheduleEntry):
        p = entry.primitive
        duration = entry.duration
        omega = -p.detuning if (detuned_sdd and entry.step_start is not None) else 0.0
        offset = entry.start - entry.step_start if entry.step_start is not None else 0.0
        if duration <= 0:
            return rho
        if propagator.integrator == "rk45":
            return propagator.integrate(rho, _sdd_hamiltonian(space, p.alpha, duration, omega, offset), duration)
        count = propagator.substeps(duration)
        h = duration / count
        uniform = sdd_unitary(space, p.alpha / count) if omega == 0 else None
        for j in range(count):
            unitary = uniform
            if unitary is None:
                amplitude = detuned_amplitude(p.alpha, duration, omega, offset + j * h, offset + (j + 1) * h)
                unitary = sdd_unitary(space, amplitude)
            rho = propagator.dephase(rho, 0.5 * h)
            rho = _apply(unitary, rho, False)
            rho = propagator.dephase(rho, 0.5 * h)
        return rho

    def run(rho, entry: ScheduleEntry, weight: float):
        p = entry.primitive
        if p.kind == "SDD":
            return sdd(rho, entry), weight
        if p.kind == "SQRX":
            if propagator.integrator == "rk45" and entry.duration > 0:
                H = (p.angle / (2.0 * entry.duration)) * _qubit_unitary(space, PAULI["x"])
                return propagator.integrate(rho, lambda s: H, entry.duration), weight
            # qubit rotations commute with motional dephasing
            rho = _apply_qubit(qubit_rotation("x", p.angle), rho, False)
            return propagator.dephase(rho, entry.duration), weight
        if p.kind == "SQRZ":
            return _apply_qubit(qubit_rotation("z", p.angle), rho, False), weight
        if p.kind == "PREP":
            return _reset_qubit(space, rho, False, p.basis), weight
        rho, w = _project(space, rho, False, p.keep)
        if propagator.integrator == "rk45":
            rho = propagator.integrate(rho, lambda s: None, entry.duration)
        else:
            rho = propagator.dephase(rho, entry.duration)
        return rho, weight * w

    init_weight = 1.0
    for entry in schedule.entries[: program.init_length]:
        rho, init_weight = run(rho, entry, init_weight)

    keep = program.final_measure.keep
    times, states, acceptance = [], [], []
    tail_check = _ReplayTail()

    def record(k, rho, lab_time):
        propagator.check(rho, lab_time)
        projected, w = _project(space, rho, False, keep)
        state = _state(space, projected, False)
        tail_check(state)
        times.append(k * program.dt)
        states.append(state)
        acceptance.append(init_weight * w)

    clock = schedule.entries[program.init_length - 1].end if program.init_length else 0.0
    if 0 in checkpoints:
        record(0, rho, clock)
    for k in range(program.K):
        for entry in schedule.step_entries(k):
            rho, _ = run(rho, entry, 1.0)
            clock = entry.end
        if k + 1 in checkpoints:
            record(k + 1, rho, clock)
        logger.debug(f"Lindblad step {k + 1}/{program.K} done at lab time {clock * 1e3:.4f} ms")

    _warn_acceptance(acceptance)
    tail_check.report()
    meta = {"init_acceptance": init_weight, "max_tail": tail_check.worst}
    return EvolutionResult(tuple(times), tuple(states), tuple(acceptance), meta=meta)


def lindblad_evolve(
    generator: Union[FourierPotential, GateProgram, PulseSchedule],
    rho0: HybridState,
    gamma_phi: float,
    times: Optional[Sequence[float]] = None,
    checkpoints: Optional[Sequence[int]] = None,
    hardware: Optional[HardwareProfile] = None,
    detuned_sdd: bool = False,
    integrator: Optional[str] = None,
) -> EvolutionResult:
    """
    Solve d rho/dt = -i[H(t), rho] + L rho L^dag - 1/2 {L^dag L, rho}, L = sqrt(gamma_phi) a^dag a.

    Potential mode (generator is a FourierPotential): H = H_sim (x) I, output
    at the given times transformed to the interaction frame.
    Program mode (GateProgram or PulseSchedule): H(t) follows the timed
    primitives of the schedule; programs are lowered with the given (or
    default) hardware profile. Output at step checkpoints, reported at k * dt.

    Args:
        generator: Potential, program or schedule
        rho0: Initial state (pure states are converted to density matrices)
        gamma_phi: Dephasing rate (1/s)
        times: Output times for potential mode
        checkpoints: Step indices for program mode (default: every step)
        hardware: Pulse timing for programs
        detuned_sdd: Integrate the phase sweep of detuned evolution SDDs
        integrator: "split" or "rk45" (default from config)

    Raises:
        IntegratorToleranceError: If the trace drifts by more than 1e-8 or an
            eigenvalue drops below -1e-8
        ExtinctionError: If a post-selection keeps no population
    """
    if gamma_phi < 0:
        raise ValueError(f"gamma_phi must be nonnegative, got {gamma_phi}")
    numerics = get_numerics()
    propagator = _Propagator(
        rho0.space,
        gamma_phi,
        integrator or str(numerics.get("lindblad_integrator", "split")),
        float(numerics.get("lindblad_max_substep_us", 2.5)) * 1e-6,
    )

    if isinstance(generator, FourierPotential):
        if times is None:
            raise ValueError("Potential-mode Lindblad evolution needs output times")
        result = _lindblad_potential(generator, rho0, _check_times(times), propagator)
        mode = "potential"
    else:
        schedule = generator
        if isinstance(generator, GateProgram):
            hw = hardware or HardwareProfile.default()
            detunings = [abs(p.detuning) for p in generator.primitives if p.kind == "SDD" and p.detuning]
            schedule = lower_to_schedule(generator, hw, detunings[0] if detunings else 0.0)
        result = _lindblad_program(
            schedule, rho0, _checkpoints(schedule.program, checkpoints), propagator, detuned_sdd
        )
        mode = "program"

    logger.debug(
        f"Lindblad ({mode}, {propagator.integrator}): gamma_phi={gamma_phi:g}/s, "
        f"{len(result)} outputs, final purity {result.purity()[-1] if len(result) else 1.0:.6f}"
    )
    return result


def prepare_initial(program: GateProgram, psi0: HybridState) -> Tuple[HybridState, float]:
    """Run the initialization block ideally; returns (state, acceptance)."""
    space = psi0.space
    data = np.array(psi0.data)
    weight = 1.0
    for primitive in program.init_block:
        if primitive.kind == "PREP":
            data = _reset_qubit(space, data, psi0.is_pure, primitive.basis)
        elif primitive.kind == "MEAS":
            data, w = _project(space, data, psi0.is_pure, primitive.keep)
            weight *= w
        else:
            data = _apply_ideal(space, primitive, data, psi0.is_pure)
    return _state(space, data, psi0.is_pure), weight


def evolve(
    potential: FourierPotential,
    program: GateProgram,
    psi0: HybridState,
    noise: NoiseModel,
    hardware: Optional[HardwareProfile] = None,
) -> EvolutionResult:
    """
    Dispatch on the noise layers: exact, gate replay or Lindblad.

    psi0 is the state before the program (qubit reset included). Potential
    modes start from the ideally initialized state and are sampled at the
    program checkpoints k * dt.
    """
    times = [k * program.dt for k in range(program.K + 1)]
    gamma = noise.effective_gamma
    if not noise.trotter:
        start, _ = prepare_initial(program, psi0)
        if gamma == 0:
            return exact_interaction_evolve(potential, start, times)
        return lindblad_evolve(potential, start, gamma, times=times)
    if gamma == 0 and not noise.detuned_sdd:
        return gate_evolve(program, psi0)
    return lindblad_evolve(program, psi0, gamma, hardware=hardware, detuned_sdd=noise.detuned_sdd)
