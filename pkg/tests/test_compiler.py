"""Tests for gate synthesis, program compilation and schedule lowering."""

import math

import numpy as np
import pytest

from tgifs.compiler import (
    SDD,
    SQRX,
    SQRZ,
    GateProgram,
    HardwareProfile,
    MidCircuitMeasure,
    QubitPrep,
    build_Q,
    build_trig_gate,
    compile_evolution,
    initialization_sequence,
    lower_to_schedule,
    rotation_y,
    trig_gate_params,
)
from tgifs.engine import prepare_initial, sdd_unitary
from tgifs.hilbert import PAULI, FockSpace, coherent_state, product_state, qubit_rotation, rotated_quadrature
from tgifs.potential import FourierPotential, FourierTerm

DELTA = 2 * math.pi * 500
ALPHA0 = math.pi / 6
KAPPA = 2 * math.sqrt(2) * ALPHA0
DT = 200e-6
LOW = 20


def sequence_unitary(space, primitives):
    """Operator product of unitary primitives given in application order."""
    unitary = np.eye(space.hybrid_dim, dtype=complex)
    for p in primitives:
        if p.kind == "SDD":
            step = sdd_unitary(space, p.alpha)
        else:
            axis = "x" if p.kind == "SQRX" else "z"
            step = np.kron(qubit_rotation(axis, p.angle), np.eye(space.dim))
        unitary = step @ unitary
    return unitary


def quadrature_functions(space, alpha, phi):
    """cos and sin of (kappa X + phi) with X the quadrature at arg(alpha) + pi/2."""
    angle = np.angle(alpha) + math.pi / 2
    x = rotated_quadrature(space, angle).matrix
    nodes, vectors = np.linalg.eigh(x)
    kappa = 2 * math.sqrt(2) * abs(alpha)
    cos = (vectors * np.cos(kappa * nodes + phi)) @ vectors.conj().T
    sin = (vectors * np.sin(kappa * nodes + phi)) @ vectors.conj().T
    return cos, sin


def hermitian_expm(generator, t):
    energies, vectors = np.linalg.eigh(0.5 * (generator + generator.conj().T))
    return (vectors * np.exp(1j * energies * t)) @ vectors.conj().T


def q_closed_form(space, alpha, theta, phi):
    """exp(i theta/2 (sigma_z cos(kappa X + phi) + sigma_y sin(kappa X + phi)))."""
    cos, sin = quadrature_functions(space, alpha, phi)
    generator = np.kron(PAULI["z"], cos) + np.kron(PAULI["y"], sin)
    return hermitian_expm(generator, theta / 2)


def low_columns(matrix, space, levels=LOW):
    """Columns with Fock index below levels in both qubit blocks."""
    n = space.dim
    cols = [q * n + m for q in range(2) for m in range(levels)]
    return matrix[:, cols]


@pytest.fixture(scope="module")
def space():
    return FockSpace(100)


class TestTrigGateParams:
    def test_first_step(self):
        params = trig_gate_params(FourierTerm(1, 4000.0, 0.0), 0, DT, 3 * math.sqrt(2), DELTA)
        assert params.alpha0 == pytest.approx(ALPHA0)
        assert params.alpha == pytest.approx(-1j * ALPHA0)
        assert params.theta == pytest.approx(0.8)
        assert params.zeta == 0.0

    def test_phase_advances_and_wraps(self):
        params = trig_gate_params((1, 4000.0, 0.3), 1, DT, 3 * math.sqrt(2), DELTA)
        assert params.zeta == pytest.approx(DELTA * DT)
        assert params.phi == 0.3
        assert params.alpha == pytest.approx(ALPHA0 * np.exp(1j * (DELTA * DT - math.pi / 2)))
        wrapped = trig_gate_params((1, 4000.0, 0.0), 12, DT, 3 * math.sqrt(2), DELTA)
        assert 0 <= wrapped.zeta < 2 * math.pi
        assert wrapped.zeta == pytest.approx(math.fmod(12 * DELTA * DT, 2 * math.pi))

    def test_half_turn_at_step_five(self):
        params = trig_gate_params((1, 4000.0, 0.0), 5, DT, 3 * math.sqrt(2), DELTA)
        assert params.zeta == pytest.approx(math.pi)

    def test_higher_harmonic(self):
        params = trig_gate_params((3, 100.0, 0.0), 0, DT, 3 * math.sqrt(2), DELTA)
        assert params.alpha0 == pytest.approx(3 * ALPHA0)
        assert params.theta == pytest.approx(100.0 * DT)

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            trig_gate_params((1, 4000.0, 0.0), 0, 0.0, 3 * math.sqrt(2), DELTA)


class TestGateSynthesis:
    def test_q_structure(self):
        alpha = 0.3 + 0.1j
        assert build_Q(alpha, 0.5, 0.0) == [SDD(alpha), SQRZ(-0.5), SDD(-alpha)]
        assert build_Q(alpha, 0.5, 0.2, -DELTA) == [
            SDD(alpha, -DELTA), SQRX(0.2), SQRZ(-0.5), SQRX(-0.2), SDD(-alpha, -DELTA),
        ]

    def test_trig_gate_structure(self):
        alpha = 0.3 + 0.1j
        gate = build_trig_gate(alpha, 0.5, 0.2)
        assert gate[:5] == build_Q(-alpha, 0.5, -0.2)
        assert gate[5:] == build_Q(alpha, 0.5, 0.2)
        assert len(build_trig_gate(alpha, 0.5, 0.0)) == 6

    @pytest.mark.parametrize("alpha, theta, phi", [
        (-1j * ALPHA0, 0.8, 0.0),
        (ALPHA0 * np.exp(0.4j), 0.5, -math.pi / 20),
        (0.25 + 0.0j, 0.3, 1.1),
    ])
    def test_q_matches_closed_form(self, space, alpha, theta, phi):
        product = sequence_unitary(space, build_Q(alpha, theta, phi))
        closed = q_closed_form(space, alpha, theta, phi)
        np.testing.assert_allclose(low_columns(product, space), low_columns(closed, space), atol=1e-7)

    def test_trig_gate_matches_product_of_q(self, space):
        alpha, theta, phi = -1j * ALPHA0, 0.8, -math.pi / 10
        gate = sequence_unitary(space, build_trig_gate(alpha, theta, phi))
        closed = q_closed_form(space, alpha, theta, phi) @ q_closed_form(space, -alpha, theta, -phi)
        np.testing.assert_allclose(low_columns(gate, space), low_columns(closed, space), atol=1e-7)

    def test_second_order_defect(self, space):
        alpha, phi = -1j * ALPHA0, 0.0
        cos, _ = quadrature_functions(space, alpha, phi)
        thetas = np.array([0.05, 0.1, 0.2, 0.4])
        defects = []
        for theta in thetas:
            gate = sequence_unitary(space, build_trig_gate(alpha, theta, phi))
            ideal = hermitian_expm(np.kron(PAULI["z"], cos), theta)
            defects.append(np.max(np.abs(low_columns(gate - ideal, space))))
        slope = np.polyfit(np.log(thetas), np.log(defects), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.15)

    def test_rotation_y(self, space):
        unitary = sequence_unitary(space, rotation_y(0.7))
        expected = np.kron(qubit_rotation("y", 0.7), np.eye(space.dim))
        np.testing.assert_allclose(unitary, expected, atol=1e-12)


class TestCompile:
    def test_layout(self, canonical_potential):
        program = compile_evolution(canonical_potential, DT, 5, -1.5)
        assert program.init_length == 9
        assert program.step_length == 6
        assert len(program.primitives) == 9 + 6 * 5 + 1
        assert program.primitives[0] == QubitPrep("down")
        assert program.init_block[-1] == MidCircuitMeasure("down")
        assert program.final_measure == MidCircuitMeasure("down")
        assert program.evolution_sdd_count == 20
        assert program.count("SDD") == 21
        assert program.potential_hash == canonical_potential.digest()

    def test_asymmetric_layout(self):
        potential = FourierPotential.from_gate_params(DELTA, ALPHA0, 0.8, DT, -math.pi / 20)
        program = compile_evolution(potential, DT, 3, -1.5)
        assert program.step_length == 10
        assert program.count("SQRX") == 2 + 4 * 3

    def test_two_terms(self):
        potential = FourierPotential(DELTA, 3 * math.sqrt(2), ((1, 4000.0, 0.0), (2, 500.0, 0.0)))
        program = compile_evolution(potential, DT, 2, 0.0)
        assert program.step_length == 12
        sdds = [p for p in program.step_block(0) if p.kind == "SDD"]
        assert abs(sdds[0].alpha) == pytest.approx(ALPHA0)
        assert abs(sdds[-1].alpha) == pytest.approx(2 * ALPHA0)

    def test_evolution_sdds_detuned(self, small_program):
        for k in range(small_program.K):
            for p in small_program.step_block(k):
                if p.kind == "SDD":
                    assert p.detuning == -DELTA
        assert all(p.detuning == 0.0 for p in small_program.init_block if p.kind == "SDD")

    def test_zero_steps(self, canonical_potential):
        program = compile_evolution(canonical_potential, DT, 0, -1.5)
        assert len(program.primitives) == 10
        assert program.evolution_sdd_count == 0

    def test_invalid(self, canonical_potential):
        with pytest.raises(ValueError):
            compile_evolution(canonical_potential, DT, -1, -1.5)
        with pytest.raises(ValueError):
            GateProgram((QubitPrep(),), 1, DT, "x", 9, 6)

    def test_initialization_prepares_coherent_state(self, space):
        x0 = -1.5
        program = compile_evolution(FourierPotential.from_gate_params(DELTA, ALPHA0, 0.8, DT), DT, 0, x0)
        state, weight = prepare_initial(program, product_state(space))
        assert weight == pytest.approx(1.0, abs=1e-12)
        expected = np.kron([1.0, 0.0], coherent_state(space, x0 / math.sqrt(2)))
        assert abs(np.vdot(expected, state.data)) == pytest.approx(1.0, abs=1e-10)

    def test_initialization_sequence(self):
        sequence = initialization_sequence(-1.5)
        assert [p.kind for p in sequence] == ["SQRZ", "SQRX", "SQRZ", "SDD", "SQRZ", "SQRX", "SQRZ"]
        assert sequence[3].alpha == pytest.approx(-1.5 / math.sqrt(2))

    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_kept_branch_is_forward_step(self, space, k):
        theta = 0.1
        potential = FourierPotential.from_gate_params(DELTA, ALPHA0, theta, DT)
        program = compile_evolution(potential, DT, 4, 0.0)
        unitary = sequence_unitary(space, program.step_block(k))
        n = space.dim
        kept = unitary[:n, :n]
        x_zeta = rotated_quadrature(space, k * DELTA * DT).matrix
        nodes, vectors = np.linalg.eigh(x_zeta)
        forward = (vectors * np.exp(-1j * theta * np.cos(KAPPA * nodes))) @ vectors.conj().T
        np.testing.assert_allclose(kept[:, :LOW], forward[:, :LOW], atol=2e-3)


class TestSchedule:
    @pytest.fixture
    def hardware(self):
        return HardwareProfile(math.pi / 150e-6, math.pi / 35e-6, 18.0)

    def test_durations(self, small_program, hardware):
        schedule = lower_to_schedule(small_program, hardware, DELTA)
        entries = schedule.entries
        init_sdd = entries[4]
        assert init_sdd.primitive.kind == "SDD"
        assert init_sdd.duration == pytest.approx(2 * 1.5 / math.sqrt(2) * 150e-6 / math.pi)
        assert entries[2].duration == pytest.approx(17.5e-6)
        assert entries[8].duration == pytest.approx(50e-6)
        for k in range(small_program.K):
            step = schedule.step_entries(k)
            sdds = [e for e in step if e.primitive.kind == "SDD"]
            assert all(e.duration == pytest.approx(50e-6) for e in sdds)
            assert sum(e.duration for e in step) == pytest.approx(DT)
        assert schedule.evolution_duration() == pytest.approx(small_program.K * DT)
        init_end = entries[8].end
        assert schedule.total_duration == pytest.approx(init_end + small_program.K * DT + 50e-6)

    def test_entries_are_contiguous(self, small_program, hardware):
        entries = lower_to_schedule(small_program, hardware, DELTA).entries
        for before, after in zip(entries[:-1], entries[1:]):
            assert after.start == pytest.approx(before.end)
        assert all(e.duration == 0.0 for e in entries if e.primitive.kind in ("SQRZ", "PREP"))

    def test_step_start_and_frame(self, small_program, hardware):
        schedule = lower_to_schedule(small_program, hardware, DELTA)
        init_end = schedule.entries[small_program.init_length - 1].end
        assert all(e.step_start is None for e in schedule.entries[: small_program.init_length])
        for k in range(small_program.K):
            for e in schedule.step_entries(k):
                assert e.step_start == pytest.approx(init_end + k * DT)
        assert schedule.entries[small_program.init_length - 1].frame == pytest.approx(0.0, abs=1e-12)
        assert schedule.entries[-1].frame == pytest.approx(2 * 0.8 * small_program.K)

    def test_motional_phase_is_constant(self, small_program, hardware):
        schedule = lower_to_schedule(small_program, hardware, DELTA)
        for k in range(small_program.K):
            for e in schedule.step_entries(k):
                if e.primitive.kind == "SDD":
                    assert abs(math.sin(e.phi_m)) < 1e-9
                    assert e.phi_s == pytest.approx(-e.frame)

    @pytest.mark.parametrize("omega, omega0, gamma, measure", [
        (0.0, 1.0, 0.0, 50e-6),
        (1.0, -1.0, 0.0, 50e-6),
        (1.0, 1.0, -1.0, 50e-6),
        (1.0, 1.0, 0.0, -1.0),
    ])
    def test_hardware_validation(self, omega, omega0, gamma, measure):
        with pytest.raises(ValueError):
            HardwareProfile(omega, omega0, gamma, measure)

    def test_default_hardware(self):
        hw = HardwareProfile.default()
        assert hw.omega == pytest.approx(math.pi / 150e-6)
        assert hw.omega0 == pytest.approx(math.pi / 35e-6)
        assert hw.gamma_phi == 18.0
