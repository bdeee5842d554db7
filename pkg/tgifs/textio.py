"""
Text codecs for programs, schedules and the CSV artifacts.
Floats are written with 17 significant digits so every file round-trips bit-exactly.
"""

import csv
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from shared.errors import FormatError

from .compiler import (
    SDD,
    SQRX,
    SQRZ,
    GateProgram,
    MidCircuitMeasure,
    Primitive,
    PulseSchedule,
    QubitPrep,
    ScheduleEntry,
)

PathLike = Union[str, Path]


def fmt(value: float) -> str:
    return f"{float(value):.17g}"


# =========================================================================
# PRIMITIVES
# =========================================================================

def primitive_to_line(primitive: Primitive) -> str:
    if primitive.kind == "SDD":
        return f"SDD {fmt(primitive.alpha.real)} {fmt(primitive.alpha.imag)} {fmt(primitive.detuning)}"
    if primitive.kind in ("SQRX", "SQRZ"):
        return f"{primitive.kind} {fmt(primitive.angle)}"
    if primitive.kind == "MEAS":
        return f"MEAS {primitive.keep}"
    if primitive.kind == "PREP":
        return f"PREP {primitive.basis}"
    raise FormatError(f"Unknown primitive kind: {primitive.kind}")


def primitive_from_tokens(tokens: Sequence[str]) -> Primitive:
    try:
        kind = tokens[0]
        if kind == "SDD":
            return SDD(complex(float(tokens[1]), float(tokens[2])), float(tokens[3]))
        if kind == "SQRX":
            return SQRX(float(tokens[1]))
        if kind == "SQRZ":
            return SQRZ(float(tokens[1]))
        if kind == "MEAS":
            return MidCircuitMeasure(tokens[1])
        if kind == "PREP":
            return QubitPrep(tokens[1])
    except (IndexError, ValueError) as e:
        raise FormatError(f"Malformed primitive line: {' '.join(tokens)}") from e
    raise FormatError(f"Unknown primitive kind: {tokens[0] if tokens else '<empty>'}")


# =========================================================================
# PROGRAMS
# =========================================================================

_PROGRAM_HEADERS = ("K", "dt_s", "hash", "init_len", "step_len")


def _program_header(program: GateProgram) -> List[str]:
    return [
        f"#K {program.K}",
        f"#dt_s {fmt(program.dt)}",
        f"#hash {program.potential_hash}",
        f"#init_len {program.init_length}",
        f"#step_len {program.step_length}",
    ]


def _parse_header(lines: Iterable[str]) -> Dict[str, str]:
    header = {}
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition(" ")
            header[key] = value.strip()
    return header


def _program_from_header(header: Dict[str, str], primitives: List[Primitive]) -> GateProgram:
    missing = [key for key in _PROGRAM_HEADERS if key not in header]
    if missing:
        raise FormatError(f"Missing header lines: {', '.join('#' + m for m in missing)}")
    try:
        return GateProgram(
            tuple(primitives),
            int(header["K"]),
            float(header["dt_s"]),
            header["hash"],
            int(header["init_len"]),
            int(header["step_len"]),
        )
    except ValueError as e:
        raise FormatError(str(e)) from e


def dump_program(program: GateProgram) -> str:
    lines = _program_header(program) + [primitive_to_line(p) for p in program.primitives]
    return "\n".join(lines) + "\n"


def load_program(text: str) -> GateProgram:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    primitives = [primitive_from_tokens(line.split()) for line in lines if not line.startswith("#")]
    return _program_from_header(_parse_header(lines), primitives)


def write_program(program: GateProgram, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_program(program), encoding="utf-8")
    return path


def read_program(path: PathLike) -> GateProgram:
    return load_program(Path(path).read_text(encoding="utf-8"))


# =========================================================================
# SCHEDULES
# =========================================================================

def dump_schedule(schedule: PulseSchedule) -> str:
    """
    One entry per line:
        start duration phi_r phi_b frame step_start|- <primitive line>
    """
    lines = _program_header(schedule.program) + [f"#total_s {fmt(schedule.total_duration)}"]
    for entry in schedule.entries:
        step_start = "-" if entry.step_start is None else fmt(entry.step_start)
        lines.append(
            f"{fmt(entry.start)} {fmt(entry.duration)} {fmt(entry.phi_r)} {fmt(entry.phi_b)} "
            f"{fmt(entry.frame)} {step_start} {primitive_to_line(entry.primitive)}"
        )
    return "\n".join(lines) + "\n"


def load_schedule(text: str) -> PulseSchedule:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    entries = []
    for line in lines:
        if line.startswith("#"):
            continue
        tokens = line.split()
        try:
            start, duration, phi_r, phi_b, frame = (float(t) for t in tokens[:5])
            step_start = None if tokens[5] == "-" else float(tokens[5])
        except (IndexError, ValueError) as e:
            raise FormatError(f"Malformed schedule line: {line}") from e
        primitive = primitive_from_tokens(tokens[6:])
        entries.append(ScheduleEntry(primitive, start, duration, phi_r, phi_b, frame, step_start))
    program = _program_from_header(_parse_header(lines), [e.primitive for e in entries])
    return PulseSchedule(tuple(entries), program)


def write_schedule(schedule: PulseSchedule, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_schedule(schedule), encoding="utf-8")
    return path


def read_schedule(path: PathLike) -> PulseSchedule:
    return load_schedule(Path(path).read_text(encoding="utf-8"))


# =========================================================================
# CSV
# =========================================================================

def write_csv(path: PathLike, fieldnames: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows with a header; floats use 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([
                value if isinstance(value, (int, np.integer, str)) else fmt(value)
                for value in row
            ])
    return path


def read_csv(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """Read a numeric CSV written by write_csv; returns (fieldnames, rows array)."""
    with Path(path).open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            fieldnames = next(reader)
        except StopIteration as e:
            raise FormatError(f"Empty CSV: {path}") from e
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as e:
            raise FormatError(f"Non-numeric CSV field in {path}") from e
    return fieldnames, np.array(rows, dtype=float).reshape(-1, len(fieldnames))


def write_wigner(path: PathLike, x_axis: np.ndarray, p_axis: np.ndarray, values: np.ndarray) -> Path:
    """Header lines with the axes, then W row-major (rows indexed by x)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        "#x_axis " + ",".join(fmt(v) for v in x_axis),
        "#p_axis " + ",".join(fmt(v) for v in p_axis),
    ]
    lines += [",".join(fmt(v) for v in row) for row in values]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_wigner(path: PathLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lines = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    header = _parse_header(lines)
    try:
        x_axis = np.array([float(v) for v in header["x_axis"].split(",")])
        p_axis = np.array([float(v) for v in header["p_axis"].split(",")])
        values = np.array([[float(v) for v in line.split(",")] for line in lines if not line.startswith("#")])
    except (KeyError, ValueError) as e:
        raise FormatError(f"Malformed Wigner file: {path}") from e
    return x_axis, p_axis, values
