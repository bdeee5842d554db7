"""Tests for the command-line surface and its exit codes."""

import numpy as np
import pytest

from tgifs import cli as cli_module
from tgifs import harness
from tgifs.cli import cli
from tgifs.textio import read_csv, read_program

SMALL = "name=cli\nK=4\ncutoff=60\ndephasing=false\ndetuned_sdd=false\n"


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def run(*argv):
    return cli([str(a) for a in argv])


class TestUsage:
    def test_help(self, capsys):
        assert run("--help") == 0
        assert "compile" in capsys.readouterr().out

    @pytest.mark.parametrize("argv", [(), ("launch",), ("evolve", "--model", "ideal"), ("tomo",)])
    def test_usage_errors(self, argv):
        assert run(*argv) == 2

    def test_missing_config(self, tmp_path, capsys):
        assert run("compile", "--config", tmp_path / "none.cfg", "--out", tmp_path) == 1
        assert "config error" in capsys.readouterr().err

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("colour=blue\n")
        assert run("compile", "--config", path, "--out", tmp_path) == 1


class TestCommands:
    def test_compile_then_evolve(self, config_file, tmp_path):
        assert run("compile", "--config", config_file, "--out", tmp_path) == 0
        program_path = tmp_path / "cli" / "program.txt"
        assert read_program(program_path).K == 4
        assert (tmp_path / "cli" / "schedule.txt").exists()

        assert run("evolve", "--config", config_file, "--program", program_path, "--out", tmp_path) == 0
        names, data = read_csv(tmp_path / "cli" / "xexpect.csv")
        assert names[:2] == ["t_s", "x_expect"]
        assert data.shape[0] == 3
        assert (tmp_path / "cli" / "xexpect_measured.csv").exists()

    def test_evolve_exact_model_skips_trotter_layer(self, config_file, tmp_path, monkeypatch):
        def refuse(*args, **kwargs):
            raise AssertionError("trotter layer evolved")

        monkeypatch.setattr(harness, "gate_evolve", refuse)
        monkeypatch.setattr(harness, "lindblad_evolve", refuse)
        assert run("evolve", "--config", config_file, "--model", "exact", "--out", tmp_path) == 0

    def test_evolve_exact_model(self, config_file, tmp_path):
        assert run("evolve", "--config", config_file, "--model", "exact", "--out", tmp_path) == 0
        _, data = read_csv(tmp_path / "cli" / "xexpect.csv")
        assert data[0, 1] == pytest.approx(-1.5, abs=1e-6)

    def test_missing_program(self, config_file, tmp_path, capsys):
        assert run("evolve", "--config", config_file, "--program", tmp_path / "nope.txt", "--out", tmp_path) == 1
        assert "error" in capsys.readouterr().err

    def test_program_config_mismatch(self, config_file, tmp_path):
        assert run("compile", "--config", config_file, "--out", tmp_path) == 0
        longer = tmp_path / "longer.cfg"
        longer.write_text(SMALL.replace("K=4", "K=6"))
        program_path = tmp_path / "cli" / "program.txt"
        assert run("evolve", "--config", longer, "--program", program_path, "--out", tmp_path) == 1

    def test_line_tomography(self, config_file, tmp_path):
        assert run("tomo", "--config", config_file, "--time-ms", 0.4, "--kind", "line", "--out", tmp_path) == 0
        names, data = read_csv(tmp_path / "cli" / "scan.csv")
        assert names[:2] == ["re_beta", "im_beta"]
        assert data.shape[0] == 50
        assert (tmp_path / "cli" / "marginal.csv").exists()

    def test_grid_tomography(self, config_file, tmp_path):
        argv = ("tomo", "--config", config_file, "--time-ms", 0, "--shots", 50, "--cutoff", 60, "--out", tmp_path)
        assert run(*argv) == 0
        assert (tmp_path / "cli" / "wigner.csv").exists()

    def test_tomography_outside_evolution(self, config_file, tmp_path):
        assert run("tomo", "--config", config_file, "--time-ms", 5, "--out", tmp_path) == 1

    def test_budget(self, config_file, tmp_path, capsys):
        assert run("budget", "--config", config_file, "--seeds", 1, "--out", tmp_path) == 0
        assert "incremental_%" in capsys.readouterr().out
        assert (tmp_path / "cli" / "budget.txt").exists()

    def test_reproduce_errors(self, config_file, tmp_path):
        assert run("reproduce", "errors", "--config", config_file, "--out", tmp_path, "--seed", 3) == 0
        assert (tmp_path / "errors" / "errors.csv").exists()
        assert "seed=3" in (tmp_path / "errors" / "meta.txt").read_text()

    @pytest.mark.parametrize("name, experiment, artifact", [
        ("fig3", "symmetric", "spectrum.txt"),
        ("fig4", "asymmetric", "panel_e.csv"),
        ("fig5", "errors", "errors.csv"),
    ])
    def test_reproduce_aliases(self, config_file, tmp_path, name, experiment, artifact):
        assert run("reproduce", name, "--config", config_file, "--out", tmp_path) == 0
        assert (tmp_path / experiment / artifact).exists()


class TestNumericalErrors:
    @pytest.mark.parametrize("error", [np.linalg.LinAlgError("singular matrix"), ValueError("bad root bracket")])
    def test_single_line_diagnostic(self, config_file, tmp_path, monkeypatch, capsys, error):
        def fail(config):
            raise error

        monkeypatch.setattr(cli_module, "compile_config", fail)
        assert run("compile", "--config", config_file, "--out", tmp_path) == 1
        err = capsys.readouterr().err
        assert err.startswith("numerical error: ")
        assert len(err.strip().splitlines()) == 1
