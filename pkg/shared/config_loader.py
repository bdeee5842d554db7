"""
Central configuration for tgifs.

config.json at the repository root holds every default (canonical
experiment, hardware, numerics, tomography plans, output paths); the
TGIFS_CONFIG environment variable points at another file.
"""

import json
import math
import os
from pathlib import Path
from typing import Any, Optional

CONFIG_PATH = Path(__file__).parent.parent / "config.json"

_config_cache: Optional[dict] = None


def _config_path() -> Path:
    override = os.getenv("TGIFS_CONFIG")
    return Path(override) if override else CONFIG_PATH


def get_config(reload: bool = False) -> dict:
    """
    The parsed config file, cached after the first read.

    Raises:
        FileNotFoundError: If the file is missing
        json.JSONDecodeError: If it is not valid JSON
    """
    global _config_cache

    if _config_cache is not None and not reload:
        return _config_cache

    path = _config_path()
    if not path.exists():
        raise FileNotFoundError(
            f"Config file not found: {path}\n"
            "Ensure config.json exists or point TGIFS_CONFIG at one."
        )
    with open(path, "r", encoding="utf-8") as f:
        loaded = json.load(f)
    if not isinstance(loaded, dict):
        raise ValueError(f"{path}: top level must be a JSON object")
    _config_cache = loaded
    return _config_cache


def get_nested(path: str, default: Any = None) -> Any:
    """
    Dot-path lookup, e.g. get_nested("numerics.cutoff") -> 100.

    Missing keys anywhere along the path give default.
    """
    node: Any = get_config()
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            return default
        node = node[key]
    return node


def get_cutoff() -> int:
    """Default Fock cutoff."""
    return int(get_nested("numerics.cutoff", 100))


def get_numerics() -> dict:
    """Numerical tolerances and integrator settings."""
    return get_nested("numerics", {})


def get_hardware() -> dict:
    """
    Hardware profile in SI units.

    Returns:
        Dict with "omega" and "omega0" in rad/s and "gamma_phi" in 1/s.
        The config stores Rabi frequencies as pi-pulse times in microseconds.
    """
    hw = get_nested("hardware", {})
    return {
        "omega": math.pi / (float(hw.get("omega_us", 150.0)) * 1e-6),
        "omega0": math.pi / (float(hw.get("omega0_us", 35.0)) * 1e-6),
        "gamma_phi": float(hw.get("gamma_phi", 18.0)),
    }


def get_tomography() -> dict:
    """Tomography plan defaults (shots, scan ranges, padding)."""
    return get_nested("tomography", {})


def get_provenance() -> dict:
    """Hardware constants recorded in artifact metadata only."""
    return get_nested("provenance", {})


def get_out_dir() -> Path:
    """Default artifact directory."""
    return Path(get_nested("paths.out", "out"))
