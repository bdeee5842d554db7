"""
Exception hierarchy for the tgifs simulator.
Every error raised on purpose by the package derives from TGIFSError.
"""

from typing import Optional, Sequence


class TGIFSError(Exception):
    """Base class for all simulator errors."""


class InvalidSpaceError(TGIFSError, ValueError):
    """Fock cutoff too small or operator/state dimensions do not match."""


class TruncationOverflowError(TGIFSError):
    """Population leaked into the top Fock levels of the truncated space."""

    def __init__(self, tail_mass: float, cutoff: int, required_cutoff: int):
        self.tail_mass = tail_mass
        self.cutoff = cutoff
        self.required_cutoff = required_cutoff
        super().__init__(
            f"Truncation overflow: tail population {tail_mass:.3e} at cutoff {cutoff}; "
            f"use a cutoff of at least {required_cutoff}"
        )


class NotHermitianError(TGIFSError, ValueError):
    """Generator passed to a Hermitian routine is not Hermitian."""


class FitError(TGIFSError, ValueError):
    """Invalid input to a Fourier or slope fit."""


class NotADoubleWellError(TGIFSError):
    """Potential does not have exactly two minima around one maximum."""

    def __init__(self, minima: Sequence[float], maxima: Sequence[float]):
        self.minima = list(minima)
        self.maxima = list(maxima)
        found_min = ", ".join(f"{x:.4f}" for x in self.minima) or "none"
        found_max = ", ".join(f"{x:.4f}" for x in self.maxima) or "none"
        super().__init__(
            f"Not a double well: minima at [{found_min}], maxima at [{found_max}]"
        )


class ConvergenceError(TGIFSError):
    """A root search or the spectrum did not converge (e.g. with respect to the Fock cutoff)."""


class ExtinctionError(TGIFSError):
    """Post-selection kept (numerically) no population."""

    def __init__(self, weight: float, keep: str):
        self.weight = weight
        self.keep = keep
        super().__init__(
            f"Post-selection extinction: weight {weight:.3e} for outcome '{keep}'"
        )


class IntegratorToleranceError(TGIFSError):
    """Lindblad integrator broke trace or positivity tolerances."""

    def __init__(self, trace_drift: float, min_eigenvalue: float, time: Optional[float] = None):
        self.trace_drift = trace_drift
        self.min_eigenvalue = min_eigenvalue
        self.time = time
        where = f" at t={time:.6g} s" if time is not None else ""
        super().__init__(
            f"Integrator tolerance failure{where}: trace drift {trace_drift:.3e}, "
            f"minimum eigenvalue {min_eigenvalue:.3e}"
        )


class GridError(TGIFSError, ValueError):
    """Characteristic-function samples do not lie on a uniform grid."""


class SeriesError(TGIFSError, ValueError):
    """Time series cannot be compared (length mismatch or zero norm)."""


class ConfigError(TGIFSError, ValueError):
    """Experiment configuration failed validation."""


class FormatError(TGIFSError, ValueError):
    """Malformed program, schedule or CSV text."""
