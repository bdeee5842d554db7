"""Tests for the Fourier potential, double-well geometry and spectrum."""

import math

import numpy as np
import pytest

from shared.errors import ConvergenceError, FitError, NotADoubleWellError
from tgifs.hilbert import FockSpace, coherent_state
from tgifs.potential import (
    FourierPotential,
    FourierTerm,
    analyze_double_well,
    derivative,
    evaluate,
    find_extrema,
    fourier_fit,
    hamiltonian,
    harmonic_operator,
    spectrum,
)

DELTA = 2 * math.pi * 500


def brute_force_xi(potential, span=3.0, points=600001):
    x = np.linspace(-span, span, points)
    v = evaluate(potential, x)
    left = x < 0
    v_top = np.max(v[np.abs(x) < 1.0])
    return 1.0 - (v_top - np.min(v[left])) / (v_top - np.min(v[~left]))


class TestPotential:
    def test_from_gate_params(self, canonical_potential):
        assert canonical_potential.lam == pytest.approx(3 * math.sqrt(2))
        (term,) = canonical_potential.terms
        assert (term.n, term.Phi) == (1, 0.0)
        assert term.B == pytest.approx(4000.0)
        assert canonical_potential.wavenumber() == pytest.approx(2 * math.pi / (3 * math.sqrt(2)))

    def test_validation(self):
        with pytest.raises(ValueError):
            FourierPotential(DELTA, 0.0)
        with pytest.raises(ValueError):
            FourierPotential(DELTA, 1.0, ((1, 1.0, 0.0), (1, 2.0, 0.0)))
        with pytest.raises(ValueError):
            FourierPotential(DELTA, 1.0, ((0, 1.0, 0.0),))

    def test_tuple_terms_are_converted(self):
        potential = FourierPotential(DELTA, 2.0, ((1, 3.0, 0.5),))
        assert potential.terms[0] == FourierTerm(1, 3.0, 0.5)

    def test_derivative_matches_finite_difference(self, canonical_potential):
        x = np.linspace(-2.5, 2.5, 11)
        step = 1e-6
        numeric = (evaluate(canonical_potential, x + step) - evaluate(canonical_potential, x - step)) / (2 * step)
        np.testing.assert_allclose(derivative(canonical_potential, x), numeric, rtol=1e-6, atol=1e-3)

    def test_digest(self, canonical_potential):
        same = FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6)
        shifted = FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6, phi=-math.pi / 20)
        assert canonical_potential.digest() == same.digest()
        assert canonical_potential.digest() != shifted.digest()


class TestFourierFit:
    def test_recovers_exact_series(self):
        lam = 3.0
        k = 2 * math.pi / lam

        def V(x):
            return 2.0 + 3.0 * math.cos(k * x + 0.5) + math.sin(2 * k * x)

        fit = fourier_fit(V, lam, 3)
        assert fit.offset == pytest.approx(2.0, abs=1e-10)
        assert fit.terms[0].B == pytest.approx(3.0, abs=1e-10)
        assert fit.terms[0].Phi == pytest.approx(0.5, abs=1e-10)
        assert fit.terms[1].B == pytest.approx(1.0, abs=1e-10)
        assert fit.terms[1].Phi == pytest.approx(1.5 * math.pi, abs=1e-10)
        assert fit.terms[2].B == pytest.approx(0.0, abs=1e-10)
        assert fit.residual < 1e-9

    def test_residual_shrinks_with_order(self):
        fits = [fourier_fit(lambda x: abs(x), 2.0, n) for n in (1, 3, 9)]
        residuals = [f.residual for f in fits]
        assert residuals[0] > residuals[1] > residuals[2]
        assert all(t.B >= 0 and 0 <= t.Phi < 2 * math.pi for t in fits[-1].terms)

    def test_to_potential(self):
        fit = fourier_fit(lambda x: math.cos(math.pi * x), 2.0, 1)
        potential = fit.to_potential(DELTA)
        assert potential.lam == 2.0
        assert evaluate(potential, 0.0) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("lam, N", [(2.0, 0), (0.0, 2), (-1.0, 2)])
    def test_invalid(self, lam, N):
        with pytest.raises(FitError):
            fourier_fit(lambda x: x, lam, N)

    def test_nonfinite_samples(self):
        with pytest.raises(FitError):
            fourier_fit(lambda x: float("inf"), 2.0, 2)


class TestDoubleWell:
    def test_canonical_geometry(self, canonical_potential):
        geometry = analyze_double_well(canonical_potential)
        assert geometry.x_min_1 == pytest.approx(-1.50, abs=0.01)
        assert geometry.x_min_2 == pytest.approx(1.50, abs=0.01)
        assert geometry.x_max == pytest.approx(0.0, abs=1e-9)
        assert geometry.barrier_height / DELTA == pytest.approx(0.92, abs=0.015)
        assert geometry.xi == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("phi", [-math.pi / 20, -math.pi / 10])
    def test_asymmetry_matches_brute_force(self, phi):
        potential = FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6, phi)
        geometry = analyze_double_well(potential)
        assert geometry.xi == pytest.approx(brute_force_xi(potential), abs=1e-4)
        assert geometry.xi < 0
        assert geometry.barrier_left > geometry.barrier_right

    @pytest.mark.parametrize("phi", [0.0, -math.pi / 20, -math.pi / 10])
    def test_extrema_are_stationary(self, phi):
        potential = FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6, phi)
        minima, maxima = find_extrema(potential)
        assert len(minima) == 2 and len(maxima) == 1
        for x in minima + maxima:
            assert abs(derivative(potential, x)) < 1e-6 * DELTA
        assert minima[0] < maxima[0] < minima[1]

    def test_asymmetry_grows_with_phase(self):
        xis = [
            analyze_double_well(FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6, phi)).xi
            for phi in (0.0, -math.pi / 40, -math.pi / 20, -math.pi / 10)
        ]
        assert xis[0] > xis[1] > xis[2] > xis[3]

    def test_mirror_phase_flips_sign(self):
        left = analyze_double_well(FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6, -0.1))
        right = analyze_double_well(FourierPotential.from_gate_params(DELTA, math.pi / 6, 0.8, 200e-6, 0.1))
        assert left.x_min_1 == pytest.approx(-right.x_min_2, abs=1e-9)
        assert left.barrier_left == pytest.approx(right.barrier_right, rel=1e-9)

    def test_parabola_is_not_a_double_well(self):
        with pytest.raises(NotADoubleWellError) as info:
            analyze_double_well(FourierPotential(DELTA, 3 * math.sqrt(2)))
        assert len(info.value.minima) == 1
        assert info.value.maxima == []

    def test_find_extrema_parabola(self):
        minima, maxima = find_extrema(FourierPotential(DELTA, 2.0))
        assert minima == [pytest.approx(0.0, abs=1e-12)]
        assert maxima == []


class TestSpectrum:
    def test_harmonic_levels(self, space40):
        parabola = FourierPotential(DELTA, 2.0)
        np.testing.assert_allclose(
            np.diag(harmonic_operator(parabola, space40).matrix).real, DELTA * (np.arange(40) + 0.5)
        )
        levels = spectrum(parabola, space40)
        np.testing.assert_allclose(levels.energies[:10], DELTA * (np.arange(10) + 0.5), rtol=1e-10)

    def test_hamiltonian_is_hermitian(self, canonical_potential, space40):
        matrix = hamiltonian(canonical_potential, space40).matrix
        np.testing.assert_allclose(matrix, matrix.conj().T, atol=1e-8)

    def test_tunnelling_doublet(self, canonical_potential, space100):
        levels = spectrum(canonical_potential, space100)
        gaps = np.diff(levels.energies[:3])
        assert gaps[0] < 0.5 * gaps[1]

    def test_two_level_occupancy(self, canonical_potential, space100):
        levels = spectrum(canonical_potential, space100)
        start = coherent_state(space100, -1.5 / math.sqrt(2))
        occupancy = levels.two_level_occupancy(start)
        assert occupancy == pytest.approx(0.95, abs=0.03)
        populations = levels.populations(np.outer(start, start.conj()))
        assert populations.sum() == pytest.approx(1.0, abs=1e-8)
        assert float(np.sum(populations[:2])) == pytest.approx(occupancy, abs=1e-12)

    def test_cutoff_independence(self, canonical_potential):
        low = spectrum(canonical_potential, FockSpace(80)).energies[:6]
        high = spectrum(canonical_potential, FockSpace(100)).energies[:6]
        np.testing.assert_allclose(low, high, rtol=0, atol=1e-8 * DELTA)

    def test_unconverged_cutoff(self, canonical_potential):
        with pytest.raises(ConvergenceError):
            spectrum(canonical_potential, FockSpace(12))
