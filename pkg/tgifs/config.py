"""
Experiment configuration: flat key=value files with unit suffixes,
overlaid on the experiment defaults of config.json.

    # canonical symmetric well
    delta_hz=500
    alpha0=0.5235987755982988
    theta=0.8
    dt_us=200
    t_total_ms=15.6
"""

from dataclasses import dataclass, replace
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from shared import get_logger
from shared.config_loader import get_cutoff, get_hardware, get_nested, get_tomography
from shared.errors import ConfigError

from .compiler import HardwareProfile
from .engine import NoiseModel
from .hilbert import FockSpace
from .potential import FourierPotential, FourierTerm

logger = get_logger("config")

TWO_PI = 2.0 * math.pi

KNOWN_KEYS = {
    "name", "delta_hz", "delta_rad_s", "dt_us", "dt_s", "t_total_ms", "K",
    "lambda", "alpha0", "B_rad_s", "theta", "phi", "terms", "x0", "initial_n_bar",
    "gamma_phi", "omega_us", "omega0_us", "estimator", "h", "shots", "seed",
    "cutoff", "detuned_sdd", "dephasing", "trotter",
}

EXCLUSIVE = (
    ("delta_hz", "delta_rad_s"),
    ("dt_us", "dt_s"),
    ("K", "t_total_ms"),
    ("lambda", "alpha0"),
    ("B_rad_s", "theta"),
)

ESTIMATORS = ("2pfd", "slope", "exact")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment: target potential, Trotter grid, initial state, hardware,
    noise layers and readout.

    Frequencies are stored in rad/s and times in seconds.
    """

    name: str
    delta: float
    dt: float
    K: int
    lam: float
    terms: Tuple[FourierTerm, ...]
    x0: float
    initial_n_bar: float
    gamma_phi: float
    omega: float
    omega0: float
    estimator: str
    h: float
    shots: Optional[int]
    seed: int
    cutoff: int
    dephasing: bool
    trotter: bool
    detuned_sdd: bool

    @property
    def alpha0(self) -> float:
        return math.pi / (math.sqrt(2) * self.lam)

    @property
    def t_total(self) -> float:
        return self.K * self.dt

    def potential(self) -> FourierPotential:
        return FourierPotential(self.delta, self.lam, self.terms)

    def hardware(self) -> HardwareProfile:
        return HardwareProfile(self.omega, self.omega0, self.gamma_phi)

    def noise(self) -> NoiseModel:
        return NoiseModel(self.gamma_phi, self.dephasing, self.trotter, self.detuned_sdd)

    def space(self) -> FockSpace:
        return FockSpace(self.cutoff)

    def checkpoints(self, stride: Optional[int] = None) -> List[int]:
        """Step indices of the reproduction grid (every stride steps, last step included)."""
        stride = int(get_nested("numerics.checkpoint_stride", 2)) if stride is None else stride
        steps = list(range(0, self.K + 1, max(stride, 1)))
        if steps[-1] != self.K:
            steps.append(self.K)
        return steps

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def dump(self) -> str:
        """key=value text that parse_config reads back to an equivalent config (omega to within an ulp)."""
        terms = ";".join(f"{t.n}:{t.B:.17g}:{t.Phi:.17g}" for t in self.terms)
        lines = [
            f"name={self.name}",
            f"delta_rad_s={self.delta:.17g}",
            f"dt_s={self.dt:.17g}",
            f"K={self.K}",
            f"lambda={self.lam:.17g}",
            f"terms={terms}",
            f"x0={self.x0:.17g}",
            f"initial_n_bar={self.initial_n_bar:.17g}",
            f"gamma_phi={self.gamma_phi:.17g}",
            f"omega_us={math.pi / self.omega * 1e6:.17g}",
            f"omega0_us={math.pi / self.omega0 * 1e6:.17g}",
            f"estimator={self.estimator}",
            f"h={self.h:.17g}",
            f"shots={'none' if self.shots is None else self.shots}",
            f"seed={self.seed}",
            f"cutoff={self.cutoff}",
            f"dephasing={str(self.dephasing).lower()}",
            f"trotter={str(self.trotter).lower()}",
            f"detuned_sdd={str(self.detuned_sdd).lower()}",
        ]
        return "\n".join(lines) + "\n"


# =========================================================================
# PARSING
# =========================================================================

def parse_pairs(text: str) -> Dict[str, str]:
    """
    Split key=value lines; '#' starts a comment.

    Raises:
        ConfigError: On malformed lines, unknown or repeated keys
    """
    pairs: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"Line {number}: expected key=value, got '{raw.strip()}'")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"Line {number}: unknown key '{key}'")
        if key in pairs:
            raise ConfigError(f"Line {number}: key '{key}' given twice")
        pairs[key] = value
    return pairs


def _float(pairs: Dict[str, str], key: str) -> float:
    try:
        value = float(pairs[key])
    except ValueError as e:
        raise ConfigError(f"{key}: expected a number, got '{pairs[key]}'") from e
    if not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def _int(pairs: Dict[str, str], key: str) -> int:
    try:
        return int(pairs[key])
    except ValueError as e:
        raise ConfigError(f"{key}: expected an integer, got '{pairs[key]}'") from e


def _bool(pairs: Dict[str, str], key: str) -> bool:
    value = pairs[key].lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ConfigError(f"{key}: expected true/false, got '{pairs[key]}'")


def _terms(text: str) -> Tuple[FourierTerm, ...]:
    terms = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        parts = chunk.split(":")
        if len(parts) != 3:
            raise ConfigError(f"terms: expected n:B_rad_s:Phi, got '{chunk}'")
        try:
            terms.append(FourierTerm(int(parts[0]), float(parts[1]), float(parts[2])))
        except ValueError as e:
            raise ConfigError(f"terms: bad entry '{chunk}'") from e
    return tuple(terms)


def _defaults() -> Dict[str, str]:
    """Experiment defaults from config.json in the key=value vocabulary."""
    exp = get_nested("experiment", {})
    hw = get_nested("hardware", {})
    noise = get_nested("noise", {})
    tomo = get_tomography()
    return {
        "name": str(exp.get("name", "experiment")),
        "delta_hz": repr(float(exp.get("delta_hz", 500.0))),
        "dt_us": repr(float(exp.get("dt_us", 200.0))),
        "t_total_ms": repr(float(exp.get("t_total_ms", 15.6))),
        "alpha0": repr(math.pi * float(exp.get("alpha0_over_pi", 1.0 / 6.0))),
        "theta": repr(float(exp.get("theta", 0.8))),
        "phi": repr(float(exp.get("phi", 0.0))),
        "x0": repr(float(exp.get("x0", -1.5))),
        "initial_n_bar": repr(float(exp.get("initial_n_bar", 0.0))),
        "gamma_phi": repr(get_hardware()["gamma_phi"]),
        "omega_us": repr(float(hw.get("omega_us", 150.0))),
        "omega0_us": repr(float(hw.get("omega0_us", 35.0))),
        "estimator": "2pfd",
        "h": repr(float(tomo.get("h", 0.4))),
        "shots": str(int(tomo.get("shots", 200))),
        "seed": str(int(exp.get("seed", 7))),
        "cutoff": str(get_cutoff()),
        "dephasing": str(bool(noise.get("dephasing", True))).lower(),
        "trotter": str(bool(noise.get("trotter", True))).lower(),
        "detuned_sdd": str(bool(noise.get("detuned_sdd", True))).lower(),
    }


def _merge(given: Dict[str, str]) -> Dict[str, str]:
    for group in EXCLUSIVE:
        present = [key for key in group if key in given]
        if len(present) > 1:
            raise ConfigError(f"Give only one of {' / '.join(group)} (got {', '.join(present)})")
    if "terms" in given and any(k in given for k in ("B_rad_s", "theta", "phi")):
        raise ConfigError("terms cannot be combined with B_rad_s / theta / phi")

    merged = dict(_defaults())
    for group in EXCLUSIVE:
        if any(key in given for key in group):
            for key in group:
                merged.pop(key, None)
    if "terms" in given:
        for key in ("theta", "phi"):
            merged.pop(key, None)
    merged.update(given)
    return merged


def build_config(given: Dict[str, str]) -> ExperimentConfig:
    """
    Resolve unit-suffixed keys over the defaults into an ExperimentConfig.

    Raises:
        ConfigError: On exclusivity violations or invalid values
    """
    pairs = _merge(given)

    delta = _float(pairs, "delta_rad_s") if "delta_rad_s" in pairs else TWO_PI * _float(pairs, "delta_hz")
    dt = _float(pairs, "dt_s") if "dt_s" in pairs else _float(pairs, "dt_us") * 1e-6
    if dt <= 0:
        raise ConfigError(f"Trotter step must be positive, got {dt}")

    if "K" in pairs:
        K = _int(pairs, "K")
    else:
        K = int(round(_float(pairs, "t_total_ms") * 1e-3 / dt))
    if K < 0:
        raise ConfigError(f"Step count must be nonnegative, got {K}")

    if "lambda" in pairs:
        lam = _float(pairs, "lambda")
    else:
        alpha0 = _float(pairs, "alpha0")
        if alpha0 <= 0:
            raise ConfigError(f"alpha0 must be positive, got {alpha0}")
        lam = math.pi / (math.sqrt(2) * alpha0)
    if lam <= 0:
        raise ConfigError(f"lambda must be positive, got {lam}")

    if "terms" in pairs:
        terms = _terms(pairs["terms"])
    else:
        B = _float(pairs, "B_rad_s") if "B_rad_s" in pairs else _float(pairs, "theta") / dt
        terms = (FourierTerm(1, B, _float(pairs, "phi")),)

    estimator = pairs["estimator"].lower()
    if estimator not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {', '.join(ESTIMATORS)}, got '{pairs['estimator']}'")

    shots_text = pairs["shots"].lower()
    shots = None if shots_text in ("none", "inf") else _int(pairs, "shots")
    if shots is not None and shots < 1:
        raise ConfigError(f"shots must be >= 1 or none, got {shots}")

    omega_us, omega0_us = _float(pairs, "omega_us"), _float(pairs, "omega0_us")
    if omega_us <= 0 or omega0_us <= 0:
        raise ConfigError("omega_us and omega0_us must be positive")

    try:
        FourierPotential(delta, lam, terms)
        config = ExperimentConfig(
            name=pairs["name"],
            delta=delta,
            dt=dt,
            K=K,
            lam=lam,
            terms=terms,
            x0=_float(pairs, "x0"),
            initial_n_bar=_float(pairs, "initial_n_bar"),
            gamma_phi=_float(pairs, "gamma_phi"),
            omega=math.pi / (omega_us * 1e-6),
            omega0=math.pi / (omega0_us * 1e-6),
            estimator=estimator,
            h=_float(pairs, "h"),
            shots=shots,
            seed=_int(pairs, "seed"),
            cutoff=_int(pairs, "cutoff"),
            dephasing=_bool(pairs, "dephasing"),
            trotter=_bool(pairs, "trotter"),
            detuned_sdd=_bool(pairs, "detuned_sdd"),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e

    if config.gamma_phi < 0 or config.initial_n_bar < 0 or config.h <= 0 or config.cutoff < 2:
        raise ConfigError("gamma_phi and initial_n_bar must be >= 0, h > 0 and cutoff >= 2")
    return config


def parse_config(text: str) -> ExperimentConfig:
    return build_config(parse_pairs(text))


def load_config(path: Optional[Union[str, Path]] = None, **overrides) -> ExperimentConfig:
    """
    Load an experiment config file (defaults only when path is None).

    Keyword overrides use the file vocabulary (e.g. seed="3", cutoff="60")
    and replace file values of the same key or of its exclusive partner.
    """
    given: Dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        given = parse_pairs(path.read_text(encoding="utf-8"))
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(f"Unknown override '{key}'")
        for group in EXCLUSIVE:
            if key in group:
                for partner in group:
                    given.pop(partner, None)
        given[key] = str(value)
    config = build_config(given)
    logger.debug(
        f"Config '{config.name}': delta={config.delta:.6g} rad/s, dt={config.dt:.3g} s, K={config.K}, "
        f"lambda={config.lam:.6g}, {len(config.terms)} term(s)"
    )
    return config


def default_config() -> ExperimentConfig:
    return load_config()
