"""
Shared fixtures: small Fock spaces, the canonical double well and
short configs that keep the suite fast.
"""

import math
from pathlib import Path
import sys

import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from tgifs.config import load_config  # noqa: E402
from tgifs.compiler import compile_evolution  # noqa: E402
from tgifs.hilbert import FockSpace  # noqa: E402
from tgifs.potential import FourierPotential  # noqa: E402

DELTA = 2 * math.pi * 500
ALPHA0 = math.pi / 6
THETA = 0.8
DT = 200e-6


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long reproduction runs (deselect with -m 'not slow')")


@pytest.fixture
def space40():
    return FockSpace(40)


@pytest.fixture
def space60():
    return FockSpace(60)


@pytest.fixture
def space100():
    return FockSpace(100)


@pytest.fixture
def canonical_potential():
    return FourierPotential.from_gate_params(DELTA, ALPHA0, THETA, DT)


@pytest.fixture
def small_config():
    """Canonical well, 10 steps, cutoff 60, noiseless layers unless overridden."""

    def make(**overrides):
        values = {"K": 10, "cutoff": 60, "dephasing": "false", "detuned_sdd": "false"}
        values.update(overrides)
        return load_config(**values)

    return make


@pytest.fixture
def small_program(canonical_potential):
    return compile_evolution(canonical_potential, DT, 4, -1.5)
