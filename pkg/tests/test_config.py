"""Tests for key=value experiment configs."""

import math

import pytest

from shared.errors import ConfigError
from tgifs.config import load_config, parse_config, parse_pairs


class TestDefaults:
    def test_canonical_experiment(self):
        config = load_config()
        assert config.delta == pytest.approx(2 * math.pi * 500)
        assert config.dt == pytest.approx(200e-6)
        assert config.K == 78
        assert config.lam == pytest.approx(3 * math.sqrt(2))
        assert config.alpha0 == pytest.approx(math.pi / 6)
        (term,) = config.terms
        assert term.B == pytest.approx(4000.0)
        assert term.Phi == 0.0
        assert config.omega == pytest.approx(math.pi / 150e-6)
        assert config.omega0 == pytest.approx(math.pi / 35e-6)
        assert config.gamma_phi == pytest.approx(18.0)
        assert config.estimator == "2pfd"
        assert config.cutoff == 100
        assert config.t_total == pytest.approx(15.6e-3)

    def test_derived_objects(self):
        config = load_config(dephasing="false")
        assert config.potential().lam == config.lam
        assert config.hardware().gamma_phi == config.gamma_phi
        noise = config.noise()
        assert noise.effective_gamma == 0.0
        assert noise.trotter
        assert config.space().cutoff == config.cutoff


class TestParsing:
    def test_comments_and_units(self):
        config = parse_config(
            "# short run\n"
            "name=short\n"
            "delta_rad_s=3000   # rad/s\n"
            "dt_us=100\n"
            "K=12\n"
            "lambda=4.0\n"
            "B_rad_s=2500\n"
            "phi=-0.15\n"
            "shots=none\n"
        )
        assert config.name == "short"
        assert config.delta == 3000.0
        assert config.dt == pytest.approx(100e-6)
        assert config.K == 12
        assert config.lam == 4.0
        assert config.terms[0].B == 2500.0
        assert config.terms[0].Phi == -0.15
        assert config.shots is None

    def test_duration_sets_step_count(self):
        assert parse_config("dt_us=100\nt_total_ms=2").K == 20

    def test_terms(self):
        config = parse_config("terms=1:4000:0; 2:500:0.5")
        assert [(t.n, t.B, t.Phi) for t in config.terms] == [(1, 4000.0, 0.0), (2, 500.0, 0.5)]

    def test_dump_round_trip(self):
        config = load_config(phi=-0.1, shots="none", seed="3", K="20")
        again = parse_config(config.dump())
        for name in ("name", "delta", "dt", "K", "lam", "terms", "x0", "estimator", "h", "shots", "seed", "cutoff"):
            assert getattr(again, name) == getattr(config, name)
        assert again.omega == pytest.approx(config.omega, rel=1e-12)
        assert (again.dephasing, again.trotter, again.detuned_sdd) == (
            config.dephasing, config.trotter, config.detuned_sdd
        )

    def test_pairs(self):
        assert parse_pairs("seed = 1  # lucky\n\nK=3") == {"seed": "1", "K": "3"}


class TestErrors:
    @pytest.mark.parametrize("text", [
        "delta_hz=500\ndelta_rad_s=3000",
        "dt_us=100\ndt_s=1e-4",
        "K=3\nt_total_ms=1",
        "lambda=4\nalpha0=0.5",
        "B_rad_s=10\ntheta=0.8",
        "terms=1:10:0\ntheta=0.8",
    ])
    def test_exclusive_keys(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    @pytest.mark.parametrize("text", [
        "colour=blue",
        "seed=1\nseed=2",
        "delta_hz 500",
        "=3",
    ])
    def test_bad_lines(self, text):
        with pytest.raises(ConfigError):
            parse_pairs(text)

    @pytest.mark.parametrize("text", [
        "estimator=fancy",
        "shots=0",
        "theta=abc",
        "theta=nan",
        "dt_us=0",
        "K=-1",
        "alpha0=-1",
        "dephasing=maybe",
        "terms=1:4000",
        "terms=1:1:0;1:2:0",
        "gamma_phi=-1",
        "h=0",
        "cutoff=1",
        "omega_us=0",
    ])
    def test_bad_values(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.cfg")

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            load_config(colour="blue")


class TestFiles:
    def test_file_with_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("name=file\nK=8\nseed=4\n")
        config = load_config(path, seed=9)
        assert (config.name, config.K, config.seed) == ("file", 8, 9)

    def test_override_replaces_exclusive_partner(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("t_total_ms=4\n")
        assert load_config(path).K == 20
        assert load_config(path, K=5).K == 5


class TestCheckpoints:
    def test_stride_includes_last_step(self, small_config):
        assert small_config(K=5).checkpoints(2) == [0, 2, 4, 5]
        assert small_config(K=4).checkpoints(2) == [0, 2, 4]
        assert small_config(K=0).checkpoints() == [0]

    def test_default_stride(self, small_config):
        assert small_config().checkpoints() == [0, 2, 4, 6, 8, 10]
        assert small_config().checkpoints(1) == list(range(11))
