"""
tgifs: programmable anharmonic dynamics on a hybrid oscillator-qubit system.

Fourier-series potentials are compiled into trigonometric gates built from
state-dependent displacements and qubit rotations, evolved exactly, at gate
level or under motional dephasing, and read out by characteristic-function
tomography.
"""

__version__ = "1.0.0"
