"""
Command-line surface.

    python main.py compile  [--config FILE]
    python main.py evolve   [--config FILE] [--program FILE] [--model exact|dephasing|full]
    python main.py tomo     [--config FILE] --time-ms T [--kind line|grid] [--shots N]
    python main.py budget   [--config FILE] [--seeds N]
    python main.py reproduce symmetric|asymmetric|errors   (or fig3|fig4|fig5)

Every subcommand takes --seed, --cutoff, --out and --verbose. Exit codes:
0 success, 1 configuration, simulation or numerical error, 2 usage error.
Traces are written in the lab frame of H_0.
"""

import argparse
import logging
from pathlib import Path
import sys
from typing import List, Optional

from shared import get_logger
from shared.config_loader import get_out_dir
from shared.errors import ConfigError, TGIFSError
from shared.logger import log_banner, set_level

from .config import ExperimentConfig, load_config
from .harness import (
    compile_config,
    estimate_trace,
    model_layers,
    reproduce_asymmetric,
    reproduce_errors,
    reproduce_symmetric,
    run_error_budget,
    write_program_artifacts,
    write_trace,
)
from .textio import read_program, write_csv, write_wigner
from .tomography import (
    SCAN_FIELDS,
    complete_hermitian,
    grid_betas,
    line_betas,
    prob_x,
    sample_scan,
    wigner_from_scan,
)

logger = get_logger("cli")

MODEL_LAYERS = {"exact": "exact", "dephasing": "dephasing", "full": "trotter"}
EXPERIMENTS = ("symmetric", "asymmetric", "errors")
EXPERIMENT_ALIASES = {"fig3": "symmetric", "fig4": "asymmetric", "fig5": "errors"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Experiment key=value file (defaults from config.json)")
    common.add_argument("--seed", type=int, help="Seed for all sampled readouts")
    common.add_argument("--cutoff", type=int, help="Fock cutoff")
    common.add_argument("--out", type=Path, help="Artifact root directory")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="tgifs", description="Programmable anharmonic dynamics simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("compile", parents=[common], help="Compile the potential to program and schedule files")

    evolve = sub.add_parser("evolve", parents=[common], help="Evolve and write the <x>(t) trace")
    evolve.add_argument("--program", type=Path, help="Program file from 'compile' (default: compile the config)")
    evolve.add_argument("--model", choices=sorted(MODEL_LAYERS), default="full", help="Error layers to include")

    tomo = sub.add_parser("tomo", parents=[common], help="Sample chi at a checkpoint and reconstruct")
    tomo.add_argument("--time-ms", type=float, required=True, help="Checkpoint time in ms")
    tomo.add_argument("--kind", choices=("line", "grid"), default="grid", help="Scan plan")
    tomo.add_argument("--shots", type=int, help="Shots per point (default from config)")

    budget = sub.add_parser("budget", parents=[common], help="SRMSE error budget")
    budget.add_argument("--seeds", type=int, help="2PFD noise realizations to average")

    reproduce = sub.add_parser("reproduce", parents=[common], help="Run a reproduction experiment")
    reproduce.add_argument("experiment", choices=EXPERIMENTS + tuple(EXPERIMENT_ALIASES))
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config, seed=args.seed, cutoff=args.cutoff)


def _out_dir(args: argparse.Namespace, name: str) -> Path:
    return (args.out or get_out_dir()) / name


def cmd_compile(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out_dir = _out_dir(args, config.name)
    program = compile_config(config)
    paths = write_program_artifacts(config, program, out_dir)
    logger.info(f"Wrote {paths['program']} ({len(program.primitives)} primitives) and {paths['schedule']}")
    return 0


def cmd_evolve(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out_dir = _out_dir(args, config.name)
    program = read_program(args.program) if args.program else compile_config(config)
    if program.potential_hash != config.potential().digest():
        logger.warning("Program hash does not match the configured potential")
    if program.K != config.K or program.dt != config.dt:
        raise ConfigError(f"Program (K={program.K}, dt={program.dt}) does not match the config")
    layer = MODEL_LAYERS[args.model]
    result = model_layers(config, program=program, names=(layer,))[layer]
    path = write_trace(result, out_dir / "xexpect.csv")
    if config.estimator != "exact":
        estimates, sigmas = estimate_trace(result.states, config)
        write_csv(out_dir / "xexpect_measured.csv", ("t_s", "x_estimate", "uncertainty"),
                  zip(result.times, estimates, sigmas))
    logger.info(f"Wrote {path} ({len(result)} checkpoints, model {args.model})")
    return 0


def cmd_tomo(args: argparse.Namespace, config: ExperimentConfig) -> int:
    out_dir = _out_dir(args, config.name)
    k = int(round(args.time_ms * 1e-3 / config.dt))
    if not 0 <= k <= config.K:
        raise ConfigError(f"--time-ms {args.time_ms} lies outside the evolution (0..{config.t_total * 1e3:g} ms)")
    state = model_layers(config, checkpoints=[k], names=("trotter",))["trotter"].states[0]
    betas = line_betas() if args.kind == "line" else grid_betas()
    shots = args.shots if args.shots is not None else config.shots
    scan = sample_scan(state, betas, shots, config.seed, kind=args.kind)
    write_csv(out_dir / "scan.csv", SCAN_FIELDS, scan.rows())
    if args.kind == "line":
        x, P = prob_x(scan)
    else:
        wigner = wigner_from_scan(complete_hermitian(scan))
        write_wigner(out_dir / "wigner.csv", wigner.x_axis, wigner.p_axis, wigner.values)
        x, P = prob_x(wigner)
    write_csv(out_dir / "marginal.csv", ("x", "P"), zip(x, P))
    logger.info(f"Wrote {args.kind} scan of {len(scan)} points at t={k * config.dt * 1e3:g} ms to {out_dir}")
    return 0


def cmd_budget(args: argparse.Namespace, config: ExperimentConfig) -> int:
    budget = run_error_budget(config, args.seeds)
    out_dir = _out_dir(args, config.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "budget.txt").write_text(budget.table(), encoding="utf-8")
    print(budget.table(), end="")
    return 0


def cmd_reproduce(args: argparse.Namespace, config: ExperimentConfig) -> int:
    experiment = EXPERIMENT_ALIASES.get(args.experiment, args.experiment)
    if experiment == "symmetric":
        report = reproduce_symmetric(config, _out_dir(args, "symmetric"))
        logger.info(f"symmetric: {len(report.artifacts)} artifacts")
    elif experiment == "asymmetric":
        panels = reproduce_asymmetric(config, _out_dir(args, "asymmetric"))
        logger.info(f"asymmetric: {len(panels)} panels")
    else:
        budget = reproduce_errors(config, _out_dir(args, "errors"))
        print(budget.table(), end="")
    return 0


COMMANDS = {
    "compile": cmd_compile,
    "evolve": cmd_evolve,
    "tomo": cmd_tomo,
    "budget": cmd_budget,
    "reproduce": cmd_reproduce,
}


def cli(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.verbose:
        set_level(logging.DEBUG)

    try:
        config = _load(args)
        log_banner(logger, f"tgifs {args.command}", config=config.name, seed=config.seed, cutoff=config.cutoff)
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (TGIFSError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as e:
        # numpy.linalg.LinAlgError is a ValueError
        print(f"numerical error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(cli())
