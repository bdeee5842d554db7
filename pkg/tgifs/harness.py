"""
Experiment harness: SRMSE error budgets and the reproduction runs that tie
compilation, evolution and tomography together.

Artifacts go to one directory per experiment, e.g. out/symmetric/:
    program.txt, schedule.txt, xexpect*.csv, scan_*.csv, marginal_*.csv,
    wigner_*.csv, spectrum.txt, budget.txt, meta.txt
"""

from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from shared import get_logger
from shared.config_loader import get_nested, get_provenance, get_tomography
from shared.errors import SeriesError

from .compiler import GateProgram, compile_evolution, lower_to_schedule
from .config import ExperimentConfig
from .engine import (
    TRACE_FIELDS,
    EvolutionResult,
    exact_interaction_evolve,
    gate_evolve,
    lindblad_evolve,
    prepare_initial,
)
from .hilbert import FockSpace, HybridState, expectation, product_state, quadratures, thermal_state
from .potential import FourierTerm, analyze_double_well, spectrum
from .textio import write_csv, write_program, write_schedule, write_wigner
from .tomography import (
    SCAN_FIELDS,
    chi_point,
    chi_protocol,
    complete_hermitian,
    grid_betas,
    line_betas,
    prob_x,
    sample_readout,
    sample_scan,
    wigner_from_scan,
    xexpect_slope,
)

logger = get_logger("harness")

SQRT2 = math.sqrt(2.0)
SLOPE_WINDOW = 0.5
SLOPE_POINTS = 6
SNAPSHOT_TIMES_MS = (0.0, 2.0, 4.0)

# seed streams, one per kind of sampled readout
STREAM_ESTIMATE = 0
STREAM_TWOPOINT = 1
STREAM_LINE = 2
STREAM_GRID = 3

ASYMMETRIC_PANELS = (
    ("a", 0.0, "left"),
    ("b", -math.pi / 20, "left"),
    ("c", -math.pi / 20, "right"),
    ("d", -math.pi / 20, "center"),
    ("e", -math.pi / 10, "left"),
)


# =========================================================================
# SRMSE AND BUDGETS
# =========================================================================

def srmse(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Scaled RMS error 100 * sqrt(sum (a - b)^2 / sum a^2), in percent; a is the reference.

    Raises:
        SeriesError: On length mismatch, empty series or zero reference norm
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise SeriesError(f"Series shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise SeriesError("Series are empty")
    norm = float(np.sum(a ** 2))
    if norm == 0:
        raise SeriesError("Reference series has zero norm")
    return 100.0 * math.sqrt(float(np.sum((a - b) ** 2)) / norm)


@dataclass(frozen=True)
class BudgetLayer:
    name: str
    incremental_srmse: float
    cumulative_srmse: float


@dataclass(frozen=True, eq=False)
class ErrorBudget:
    """
    Layered SRMSE of <x>(t): exact -> dephasing -> trotter -> 2pfd.

    Incremental values compare each layer with the previous one; cumulative
    values compare with the exact trace.
    """

    layers: Tuple[BudgetLayer, ...]
    times: np.ndarray
    traces: Dict[str, np.ndarray] = field(default_factory=dict)

    def layer(self, name: str) -> BudgetLayer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def table(self) -> str:
        rows = [f"{'layer':<12}{'incremental_%':>16}{'cumulative_%':>16}"]
        for layer in self.layers[1:]:
            rows.append(f"{layer.name:<12}{layer.incremental_srmse:>16.2f}{layer.cumulative_srmse:>16.2f}")
        return "\n".join(rows) + "\n"


# =========================================================================
# MODEL TRACES
# =========================================================================

def initial_state(config: ExperimentConfig, space: Optional[FockSpace] = None) -> HybridState:
    """|down> with the oscillator in vacuum, or thermal when initial_n_bar > 0."""
    space = space or config.space()
    if config.initial_n_bar > 0:
        return thermal_state(space, config.initial_n_bar)
    return product_state(space)


def compile_config(config: ExperimentConfig) -> GateProgram:
    return compile_evolution(config.potential(), config.dt, config.K, config.x0)


LAYER_NAMES = ("exact", "dephasing", "trotter")


def model_layers(
    config: ExperimentConfig,
    checkpoints: Optional[Sequence[int]] = None,
    program: Optional[GateProgram] = None,
    names: Sequence[str] = LAYER_NAMES,
) -> Dict[str, EvolutionResult]:
    """
    Evolve the requested cumulative error layers at the given checkpoints.

    Only the named layers are evolved; a disabled layer repeats the previous
    one. Results are rotated to the lab frame of H_0, where <x> follows the
    double-well dynamics rather than the fast harmonic swing.

    Returns:
        {name: EvolutionResult} for each of names, a subset of
        ("exact", "dephasing", "trotter")
    """
    unknown = [name for name in names if name not in LAYER_NAMES]
    if unknown:
        raise ValueError(f"Unknown model layer(s): {', '.join(unknown)}")
    checkpoints = list(config.checkpoints() if checkpoints is None else checkpoints)
    potential = config.potential()
    program = program or compile_config(config)
    psi0 = initial_state(config)
    times = [k * config.dt for k in checkpoints]
    gamma = config.gamma_phi if config.dephasing else 0.0
    built: Dict[str, EvolutionResult] = {}

    def start() -> HybridState:
        return prepare_initial(program, psi0)[0]

    def evolve(name: str) -> EvolutionResult:
        if name == "exact":
            return exact_interaction_evolve(potential, start(), times)
        if name == "dephasing":
            if gamma <= 0:
                return layer("exact")
            return lindblad_evolve(potential, start(), gamma, times=times)
        if not config.trotter:
            return layer("dephasing")
        if gamma == 0 and not config.detuned_sdd:
            return gate_evolve(program, psi0, checkpoints)
        return lindblad_evolve(
            program, psi0, gamma,
            checkpoints=checkpoints,
            hardware=config.hardware(),
            detuned_sdd=config.detuned_sdd,
        )

    def layer(name: str) -> EvolutionResult:
        if name not in built:
            built[name] = evolve(name).to_lab(config.delta)
        return built[name]

    return {name: layer(name) for name in names}


def _seed(config: ExperimentConfig, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.seed, spawn_key=tuple(key))


def twopoint_traces(
    states: Sequence[HybridState],
    h: float,
    shots: Optional[int],
    config: ExperimentConfig,
    repeats: int = 1,
) -> List[np.ndarray]:
    """
    2PFD <x> traces, one per repeat; repeat r at checkpoint i draws from (seed, 2pfd, r, i).

    shots=None gives a single noiseless trace.
    """
    if shots is None:
        return [np.array([chi_point(s, 1j * h).imag for s in states]) / (SQRT2 * h)]
    readouts = [chi_protocol(s, 1j * h)[1] for s in states]
    traces = []
    for r in range(repeats):
        values = [
            sample_readout(np.random.default_rng(_seed(config, STREAM_TWOPOINT, r, i)), im, shots)
            for i, im in enumerate(readouts)
        ]
        traces.append(np.array(values) / (SQRT2 * h))
    return traces


def run_error_budget(config: ExperimentConfig, seeds: Optional[int] = None) -> ErrorBudget:
    """
    Layered SRMSE budget of <x>(t) on the reproduction grid.

    The 2PFD layer reads out the dephasing + Trotter states with
    (config.h, config.shots) and is averaged over `seeds` noise realizations.
    """
    seeds = int(get_nested("budget.seeds", 20)) if seeds is None else seeds
    checkpoints = config.checkpoints()
    layers = model_layers(config, checkpoints)
    times = np.array(layers["exact"].times)
    x_exact = layers["exact"].x_expect()
    x_dephasing = layers["dephasing"].x_expect()
    x_trotter = layers["trotter"].x_expect()
    twopoint = twopoint_traces(layers["trotter"].states, config.h, config.shots, config, max(seeds, 1))

    budget_layers = (
        BudgetLayer("exact", 0.0, 0.0),
        BudgetLayer("dephasing", srmse(x_exact, x_dephasing), srmse(x_exact, x_dephasing)),
        BudgetLayer("trotter", srmse(x_dephasing, x_trotter), srmse(x_exact, x_trotter)),
        BudgetLayer(
            "2pfd",
            float(np.mean([srmse(x_trotter, t) for t in twopoint])),
            float(np.mean([srmse(x_exact, t) for t in twopoint])),
        ),
    )
    for layer in budget_layers[1:]:
        logger.info(
            f"{layer.name:<10} incremental {layer.incremental_srmse:6.2f}%  cumulative {layer.cumulative_srmse:6.2f}%"
        )
    traces = {"exact": x_exact, "dephasing": x_dephasing, "trotter": x_trotter, "2pfd": twopoint[0]}
    return ErrorBudget(budget_layers, times, traces)


# =========================================================================
# ESTIMATES AND REPORTS
# =========================================================================

def estimate_trace(
    states: Sequence[HybridState],
    config: ExperimentConfig,
    estimator: Optional[str] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Measured <x> at each state with the configured estimator.

    Returns:
        (estimates, one-sigma uncertainties)
    """
    estimator = estimator or config.estimator
    if not states:
        return np.array([]), np.array([])
    x, _ = quadratures(states[0].space)
    values, sigmas = [], []
    for i, state in enumerate(states):
        if estimator == "exact":
            values.append(expectation(x, state).real)
            sigmas.append(0.0)
        elif estimator == "2pfd":
            if config.shots is None:
                im, noise = chi_point(state, 1j * config.h).imag, 0.0
            else:
                im_true = chi_protocol(state, 1j * config.h)[1]
                rng = np.random.default_rng(_seed(config, STREAM_ESTIMATE, i))
                im = sample_readout(rng, im_true, config.shots)
                noise = math.sqrt(max(1.0 - im ** 2, 0.0) / config.shots)
            values.append(im / (SQRT2 * config.h))
            sigmas.append(noise / (SQRT2 * config.h))
        else:
            shots = int(get_tomography().get("line_scan_shots", 500)) if config.shots is not None else None
            betas = 1j * np.linspace(0.0, SLOPE_WINDOW, SLOPE_POINTS)
            seed = int(_seed(config, STREAM_ESTIMATE, i).generate_state(1)[0])
            scan = sample_scan(state, betas, shots, seed, kind="line")
            value, sigma = xexpect_slope(scan, model=str(get_tomography().get("slope_model", "cubic")))
            values.append(value)
            sigmas.append(sigma)
    return np.array(values), np.array(sigmas)


def barrier_traversals(x: Sequence[float]) -> int:
    """Number of sign changes of <x>(t)."""
    signs = np.sign(np.asarray(x, dtype=float))
    signs = signs[signs != 0]
    return int(np.sum(signs[1:] != signs[:-1]))


def first_extremum_time(times: Sequence[float], x: Sequence[float]) -> float:
    """Time of the first extremum on the side opposite to the start."""
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    start = np.sign(x[0]) or -1.0
    opposite = np.flatnonzero(np.sign(x) == -start)
    if opposite.size == 0:
        return float("nan")
    first = opposite[0]
    run = first
    while run + 1 < len(x) and np.sign(x[run + 1]) == -start:
        run += 1
    segment = x[first: run + 1] * -start
    return float(times[first + int(np.argmax(segment))])


def write_meta(out_dir: Path, config: ExperimentConfig, **fields) -> Path:
    """meta.txt: the resolved config, run fields and the hardware provenance constants."""
    lines = [config.dump().rstrip("\n")]
    lines += [f"{key}={value}" for key, value in fields.items()]
    lines += [f"provenance.{key}={value}" for key, value in get_provenance().items()]
    path = Path(out_dir) / "meta.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_program_artifacts(config: ExperimentConfig, program: GateProgram, out_dir: Path) -> Dict[str, Path]:
    schedule = lower_to_schedule(program, config.hardware(), config.delta)
    return {
        "program": write_program(program, out_dir / "program.txt"),
        "schedule": write_schedule(schedule, out_dir / "schedule.txt"),
    }


def write_trace(result: EvolutionResult, path: Path) -> Path:
    return write_csv(path, TRACE_FIELDS, result.trace_rows())


def _label(t_ms: float) -> str:
    return f"{t_ms:g}ms"


# =========================================================================
# REPRODUCTIONS
# =========================================================================

@dataclass(frozen=True, eq=False)
class SymmetricReport:
    times: np.ndarray
    x_exact: np.ndarray
    x_model: np.ndarray
    two_level_occupancy: float
    traversals: int
    first_extremum: float
    artifacts: Dict[str, Path]


def reproduce_symmetric(config: ExperimentConfig, out_dir: Union[str, Path]) -> SymmetricReport:
    """
    Tunnelling in the symmetric double well.

    Emits the exact and noise-model lab-frame <x>(t) traces, slope-estimated data points
    from sampled line scans, P(x) and W(x, p) at 0/2/4 ms and the spectrum report.
    """
    out_dir = Path(out_dir)
    potential = config.potential()
    program = compile_config(config)
    artifacts = write_program_artifacts(config, program, out_dir)

    layers = model_layers(config, program=program, names=("exact", "trotter"))
    exact, model = layers["exact"], layers["trotter"]
    artifacts["xexpect"] = write_trace(model, out_dir / "xexpect.csv")
    artifacts["xexpect_exact"] = write_trace(exact, out_dir / "xexpect_exact.csv")

    estimates, sigmas = estimate_trace(model.states, config, "slope")
    artifacts["xexpect_measured"] = write_csv(
        out_dir / "xexpect_measured.csv", ("t_s", "x_estimate", "uncertainty"),
        zip(model.times, estimates, sigmas),
    )

    steps = config.checkpoints()
    line_shots = int(get_tomography().get("line_scan_shots", 500))
    grid_shots = int(get_tomography().get("grid_shots", 250))
    for t_ms in SNAPSHOT_TIMES_MS:
        k = int(round(t_ms * 1e-3 / config.dt))
        if k not in steps:
            continue
        state = model.states[steps.index(k)]
        label = _label(t_ms)
        line = sample_scan(state, line_betas(), line_shots, int(_seed(config, STREAM_LINE, k).generate_state(1)[0]), "line")
        artifacts[f"scan_{label}"] = write_csv(out_dir / f"scan_{label}.csv", SCAN_FIELDS, line.rows())
        x_axis, P = prob_x(line)
        artifacts[f"marginal_{label}"] = write_csv(out_dir / f"marginal_{label}.csv", ("x", "P"), zip(x_axis, P))
        grid = sample_scan(state, grid_betas(), grid_shots, int(_seed(config, STREAM_GRID, k).generate_state(1)[0]))
        wigner = wigner_from_scan(complete_hermitian(grid))
        artifacts[f"wigner_{label}"] = write_wigner(out_dir / f"wigner_{label}.csv", wigner.x_axis, wigner.p_axis, wigner.values)

    space = config.space()
    levels = spectrum(potential, space)
    start, _ = prepare_initial(program, initial_state(config, space))
    occupancy = levels.two_level_occupancy(start.density()[: space.dim, : space.dim])
    geometry = analyze_double_well(potential)
    report_lines = [
        f"two_level_occupancy={occupancy:.17g}",
        f"x_min_1={geometry.x_min_1:.17g}",
        f"x_min_2={geometry.x_min_2:.17g}",
        f"x_max={geometry.x_max:.17g}",
        f"barrier_height_over_delta={geometry.barrier_height / potential.delta:.17g}",
        f"xi={geometry.xi:.17g}",
    ]
    report_lines += [
        f"level_{n}_over_delta={(e - levels.energies[0]) / potential.delta:.17g}"
        for n, e in enumerate(levels.energies[:6])
    ]
    spectrum_path = out_dir / "spectrum.txt"
    spectrum_path.write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    artifacts["spectrum"] = spectrum_path

    x_exact = exact.x_expect()
    traversals = barrier_traversals(x_exact)
    first = first_extremum_time(exact.times, x_exact)
    artifacts["meta"] = write_meta(
        out_dir, config,
        program_hash=program.potential_hash,
        evolution_sdds=program.evolution_sdd_count,
        two_level_occupancy=f"{occupancy:.17g}",
        traversals=traversals,
        final_acceptance=f"{model.acceptance_probability[-1]:.17g}",
    )
    logger.info(
        f"Symmetric well: occupancy {occupancy:.4f}, {traversals} traversals, "
        f"first opposite extremum at {first * 1e3:.2f} ms"
    )
    return SymmetricReport(
        np.array(exact.times), x_exact, model.x_expect(), occupancy, traversals, first, artifacts
    )


@dataclass(frozen=True, eq=False)
class AsymmetricPanel:
    label: str
    phi: float
    x0: float
    xi: float
    times: np.ndarray
    x_theory: np.ndarray
    x_data: np.ndarray

    @property
    def amplitude(self) -> float:
        return float(np.max(self.x_theory) - np.min(self.x_theory))


def _panel_x0(config: ExperimentConfig, where: str) -> float:
    geometry = analyze_double_well(config.potential())
    if where == "left":
        return geometry.x_min_1
    if where == "right":
        return geometry.x_min_2
    return 0.0


def reproduce_asymmetric(
    config: ExperimentConfig,
    out_dir: Union[str, Path],
    panels: Sequence[Tuple[str, float, str]] = ASYMMETRIC_PANELS,
) -> List[AsymmetricPanel]:
    """
    Programmable asymmetric wells: one panel per (label, phi, start).

    Each panel records the noiseless 2PFD theory trace of the configured
    noise model and the sampled 2PFD data trace; start is "left", "right"
    (well minima) or "center" (x = 0).
    """
    out_dir = Path(out_dir)
    B = config.terms[0].B
    results = []
    meta = {}
    for label, phi, where in panels:
        shaped = config.with_overrides(terms=(FourierTerm(1, B, phi),))
        x0 = _panel_x0(shaped, where)
        panel_config = shaped.with_overrides(x0=x0, name=f"{config.name}_{label}")
        xi = analyze_double_well(panel_config.potential()).xi
        model = model_layers(panel_config, names=("trotter",))["trotter"]
        theory = twopoint_traces(model.states, panel_config.h, None, panel_config)[0]
        data = twopoint_traces(model.states, panel_config.h, panel_config.shots, panel_config)[0]
        write_csv(
            out_dir / f"panel_{label}.csv",
            ("t_s", "x_expect", "x_theory", "x_2pfd", "acceptance"),
            zip(model.times, model.x_expect(), theory, data, model.acceptance_probability),
        )
        panel = AsymmetricPanel(label, phi, x0, xi, np.array(model.times), theory, data)
        results.append(panel)
        meta.update({f"phi_{label}": f"{phi:.17g}", f"x0_{label}": f"{x0:.17g}", f"xi_{label}": f"{xi:.17g}"})
        logger.info(f"Panel {label}: phi={phi:+.4f}, x0={x0:+.3f}, xi={xi:+.3f}, amplitude {panel.amplitude:.3f}")
    write_meta(out_dir, config, **meta)
    return results


def reproduce_errors(config: ExperimentConfig, out_dir: Union[str, Path], seeds: Optional[int] = None) -> ErrorBudget:
    """Layered <x>(t) traces (exact, +dephasing, +Trotter, +2PFD) and the budget table."""
    out_dir = Path(out_dir)
    budget = run_error_budget(config, seeds)
    write_csv(
        out_dir / "errors.csv",
        ("t_s", "exact", "dephasing", "trotter", "twopoint"),
        zip(budget.times, *(budget.traces[name] for name in ("exact", "dephasing", "trotter", "2pfd"))),
    )
    (out_dir / "budget.txt").write_text(budget.table(), encoding="utf-8")
    write_meta(out_dir, config, seeds=seeds if seeds is not None else get_nested("budget.seeds", 20))
    return budget
