import numpy as np
import pytest

from sitcarpet.cli import main
from sitcarpet.config import (
    ConfigError,
    PRESET_NAMES,
    ScenarioConfig,
    preset,
    table1_params,
)


class TestConfigRoundTrip:
    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_text_round_trip(self, name):
        cfg = preset(name)
        text = cfg.to_text()
        cfg2 = ScenarioConfig.from_text(text)
        assert cfg2.to_text() == text
        for sec in ScenarioConfig.SECTIONS:
            assert getattr(cfg, sec) == getattr(cfg2, sec)

    def test_scenarios_construct(self):
        for name in PRESET_NAMES:
            scen = preset(name).scenario()
            assert scen.t_end > 0

    def test_comments_and_blanks(self):
        cfg = ScenarioConfig.from_text(
            "# a comment\n\nmodel.gamma = 0.5\nrun.t_end = 5.0  # trailing\n")
        assert cfg.model["gamma"] == 0.5
        assert cfg.run["t_end"] == 5.0

    def test_parse_errors(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_text("nonsense line here\n")
        with pytest.raises(ConfigError):
            ScenarioConfig.from_text("weird.key = 1\n")

    def test_validation_errors(self):
        cfg = preset("fig1")
        cfg.model["rho"] = 2.0
        with pytest.raises(ConfigError, match="model"):
            cfg.scenario()
        cfg = preset("fig1")
        del cfg.run["t_end"]
        with pytest.raises(ConfigError, match="t_end"):
            cfg.scenario()
        cfg = preset("carpet")
        cfg.schedule["R1"] = 50.0
        with pytest.raises(ConfigError, match="schedule"):
            cfg.scenario()

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset("fig9")

    def test_hetero_K_field(self):
        cfg = preset("carpet-hetero")
        scen = cfg.scenario()
        K = scen.params.K_at(np.linspace(0, 45, 1000))
        assert K.min() >= 150.0 - 1e-9
        assert K.max() <= 250.0 + 1e-9


class TestCli:
    def test_analyze_runs(self, tmp_path, capsys):
        rc = main(["analyze", "--preset", "fig1", "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "gamma_c" in out and "BistableAboveGamma0" in out
        assert any(p.name == "analysis.txt" for d in tmp_path.iterdir()
                   for p in d.iterdir())

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("model.rho = 2.0\nrun.t_end = 1\ngrid.kind = radial2d\n"
                       "grid.r_max = 5\ngrid.n = 11\n")
        rc = main(["simulate", "--config", str(bad), "--out", str(tmp_path)])
        assert rc == 2
        rc = main(["simulate", "--out", str(tmp_path)])
        assert rc == 2

    def test_simulate_writes_run_dir(self, tmp_path):
        cfg = preset("fig1")
        cfg.run["t_end"] = 10.0
        path = tmp_path / "quick.cfg"
        path.write_text(cfg.to_text())
        rc = main(["simulate", "--config", str(path), "--out", str(tmp_path)])
        assert rc == 0
        run_dirs = [d for d in tmp_path.iterdir() if d.is_dir()]
        assert len(run_dirs) == 1
        files = {p.name for p in run_dirs[0].iterdir()}
        assert {"config.echo", "snapshots.csv", "trace.csv",
                "outcome.txt"} <= files

    def test_simulate_deterministic_bytes(self, tmp_path):
        cfg = preset("fig1")
        cfg.run["t_end"] = 5.0
        path = tmp_path / "quick.cfg"
        path.write_text(cfg.to_text())
        blobs = []
        for sub in ("a", "b"):
            rc = main(["simulate", "--config", str(path),
                       "--out", str(tmp_path / sub)])
            assert rc == 0
            d = next(p for p in (tmp_path / sub).iterdir())
            blobs.append((d / "snapshots.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_sweep_single_value_matches_simulate(self, tmp_path, capsys):
        cfg = preset("fig1")
        cfg.run["t_end"] = 40.0
        path = tmp_path / "quick.cfg"
        path.write_text(cfg.to_text())
        rc = main(["sweep", "--config", str(path), "--axis", "model.gamma",
                   "--values", "0.5", "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Invasion" in out

    def test_lambda_sweep_flips_outcome(self, tmp_path, capsys):
        # small releases leave re-invasion, the searched amplitude blocks
        cfg = preset("carpet")
        path = tmp_path / "carpet.cfg"
        path.write_text(cfg.to_text())
        lam = cfg.schedule["lambda_bar"]
        rc = main(["sweep", "--config", str(path),
                   "--axis", "schedule.lambda_bar",
                   "--values", f"{lam / 100},{lam}",
                   "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        lines = [ln for ln in out.splitlines() if "Invasion" in ln
                 or "Carpet" in ln]
        assert "Invasion" in lines[0] and "Carpet" in lines[1]

    def test_cost_table(self, capsys, tmp_path):
        rc = main(["cost", "--preset", "carpet", "--out", str(tmp_path),
                   "--horizons", "10,100,1000,10000"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "naive-disc" in out and "annulus" in out

    def test_verify_sterile_bounds(self, tmp_path, capsys):
        rc = main(["verify", "--preset", "carpet", "--which",
                   "sterile-bounds", "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
