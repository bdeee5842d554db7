"""Tests for the program, schedule, CSV and Wigner text formats."""

import math

import numpy as np
import pytest

from shared.errors import FormatError
from tgifs.compiler import SDD, SQRX, HardwareProfile, MidCircuitMeasure, QubitPrep, lower_to_schedule
from tgifs.textio import (
    dump_program,
    dump_schedule,
    load_program,
    load_schedule,
    primitive_from_tokens,
    primitive_to_line,
    read_csv,
    read_program,
    read_wigner,
    write_csv,
    write_program,
    write_schedule,
    write_wigner,
)


@pytest.fixture
def schedule(small_program):
    return lower_to_schedule(small_program, HardwareProfile(math.pi / 150e-6, math.pi / 35e-6, 18.0), 2 * math.pi * 500)


class TestPrimitives:
    @pytest.mark.parametrize("primitive, line", [
        (SQRX(0.5), "SQRX 0.5"),
        (MidCircuitMeasure("down"), "MEAS down"),
        (QubitPrep("up"), "PREP up"),
        (SDD(0.25 - 0.5j, -10.0), "SDD 0.25 -0.5 -10"),
    ])
    def test_lines(self, primitive, line):
        assert primitive_to_line(primitive) == line
        assert primitive_from_tokens(line.split()) == primitive

    @pytest.mark.parametrize("line", ["SDD 1.0", "SQRX abc", "ROT 1.0", "MEAS"])
    def test_malformed(self, line):
        with pytest.raises(FormatError):
            primitive_from_tokens(line.split())


class TestPrograms:
    def test_program_text_is_exact(self, small_program):
        text = dump_program(small_program)
        assert text.startswith("#K 4\n")
        loaded = load_program(text)
        assert loaded == small_program
        assert dump_program(loaded) == text

    def test_program_file(self, small_program, tmp_path):
        path = write_program(small_program, tmp_path / "nested" / "program.txt")
        assert read_program(path) == small_program

    def test_missing_header(self, small_program):
        text = "\n".join(line for line in dump_program(small_program).splitlines() if not line.startswith("#hash"))
        with pytest.raises(FormatError, match="#hash"):
            load_program(text)

    def test_inconsistent_length(self, small_program):
        lines = dump_program(small_program).splitlines()
        with pytest.raises(FormatError):
            load_program("\n".join(lines[:-1]))

    def test_schedule_text_is_exact(self, schedule):
        text = dump_schedule(schedule)
        loaded = load_schedule(text)
        assert loaded.program == schedule.program
        assert loaded.entries == schedule.entries
        assert loaded.total_duration == schedule.total_duration
        assert "#total_s" in text

    def test_schedule_file(self, schedule, tmp_path):
        path = write_schedule(schedule, tmp_path / "schedule.txt")
        assert dump_schedule(load_schedule(path.read_text())) == dump_schedule(schedule)

    def test_malformed_schedule_line(self, schedule):
        lines = dump_schedule(schedule).splitlines()
        lines[-1] = "0.0 oops " + lines[-1]
        with pytest.raises(FormatError):
            load_schedule("\n".join(lines))


class TestCsv:
    def test_csv(self, tmp_path):
        rows = [(0.0, 1.0 / 3.0, 7), (2e-4, -0.5, 8)]
        path = write_csv(tmp_path / "out" / "trace.csv", ("t_s", "x", "shots"), rows)
        lines = path.read_text().splitlines()
        assert lines[0] == "t_s,x,shots"
        assert lines[1] == "0,0.33333333333333331,7"
        names, data = read_csv(path)
        assert names == ["t_s", "x", "shots"]
        np.testing.assert_array_equal(data, np.array(rows, dtype=float))

    def test_empty_and_bad_csv(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(FormatError):
            read_csv(empty)
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,x\n")
        with pytest.raises(FormatError):
            read_csv(bad)

    def test_header_only(self, tmp_path):
        path = write_csv(tmp_path / "header.csv", ("a", "b"), [])
        names, data = read_csv(path)
        assert names == ["a", "b"]
        assert data.shape == (0, 2)

    def test_wigner(self, tmp_path):
        x = np.linspace(-1, 1, 3)
        p = np.linspace(-2, 2, 4)
        values = np.arange(12, dtype=float).reshape(3, 4) / 7.0
        path = write_wigner(tmp_path / "wigner.csv", x, p, values)
        x_read, p_read, values_read = read_wigner(path)
        np.testing.assert_array_equal(x_read, x)
        np.testing.assert_array_equal(p_read, p)
        np.testing.assert_array_equal(values_read, values)

    def test_malformed_wigner(self, tmp_path):
        path = tmp_path / "wigner.csv"
        path.write_text("#x_axis 0,1\n0.5,0.5\n")
        with pytest.raises(FormatError):
            read_wigner(path)
