import json
import os

import numpy as np
import pytest

from duffing_qdyn.cli import main, parse_sweep, read_config_file
from duffing_qdyn.errors import ConfigError
from duffing_qdyn.scenarios import PRESETS, ScenarioConfig


def read_csv(path):
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    return header, rows


class TestConfigSurface:
    def test_parse_sweep(self):
        assert parse_sweep("nbar:0:2:6") == ("nbar", 0.0, 2.0, 6)
        with pytest.raises(ConfigError):
            parse_sweep("nbar:0:2")

    def test_sweep_variable_validation(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario="bose-ratio", sweep=("gamma", 0, 1, 5))
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario="bose-ratio", sweep=("nbar", 0, 1, 1))
        with pytest.raises(ConfigError):
            ScenarioConfig(scenario="levels", sweep=("beta", 0, 1, 5))

    def test_config_file_round_trip(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# comment line\n"
            "lambda = 0.016\n"
            "beta = 0.05\n"
            "kappa = 0.005  # inline comment\n"
            "dim = 30\n"
            "sweep = nbar:0:2:4\n"
            "out = somewhere/prefix\n"
        )
        values = read_config_file(str(cfg))
        assert values["lam"] == 0.016
        assert values["kappa"] == 0.005
        assert values["dim"] == 30
        assert values["sweep"] == ("nbar", 0.0, 2.0, 4)

    def test_config_file_unknown_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("volume = 11\n")
        with pytest.raises(ConfigError):
            read_config_file(str(cfg))


class TestCliRuns:
    def test_levels_csv_schema(self, tmp_path):
        prefix = str(tmp_path / "lv")
        rc = main([
            "levels", "--lambda", "0.016", "--beta", "0.05333333333333333",
            "--n-max", "6", "--out", prefix,
        ])
        assert rc == 0
        header, rows = read_csv(prefix + "-spacings.csv")
        assert header == ["n", "dE_exact", "dE_order0", "dE_order2", "dE_order4"]
        assert len(rows) == 6
        first = open(prefix + "-spacings.csv").readline().strip()
        assert first == "# schema=1"

    def test_attractors_zero_drive_single_row(self, tmp_path):
        prefix = str(tmp_path / "a0")
        rc = main(["attractors", "--beta", "0", "--out", prefix])
        assert rc == 0
        header, rows = read_csv(prefix + "-roots.csv")
        # one row per steady-condition variant, both with alpha = 0
        assert {r[header.index("branch")] for r in rows} == {"las"}
        assert all(float(r[header.index("re_alpha")]) == 0 for r in rows)

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("lambda=0.02\nbeta=0.04\n")
        prefix = str(tmp_path / "ov")
        rc = main([
            "levels", "--config", str(cfg), "--lambda", "0.016", "--n-max", "3",
            "--out", prefix,
        ])
        assert rc == 0
        manifest = json.load(open(prefix + "-manifest.json"))
        assert manifest["parameters"]["lam"] == 0.016
        assert manifest["parameters"]["beta"] == 0.04

    def test_byte_identical_reruns(self, tmp_path):
        args = ["levels", "--lambda", "0.016", "--beta", "0.05", "--n-max", "4"]
        p1, p2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        assert main(args + ["--out", p1]) == 0
        assert main(args + ["--out", p2]) == 0
        b1 = open(p1 + "-spacings.csv", "rb").read()
        b2 = open(p2 + "-spacings.csv", "rb").read()
        assert b1 == b2

    def test_error_json_on_bad_config(self, tmp_path):
        prefix = str(tmp_path / "bad")
        rc = main(["bose-ratio", "--sweep", "beta:0:1:5", "--out", prefix])
        assert rc == 2
        payload = json.load(open(prefix + "-error.json"))
        assert payload["error"] == "config"

    def test_solver_error_exit_code(self, tmp_path):
        prefix = str(tmp_path / "mono")
        # monostable drive: the HAS branch does not exist
        rc = main([
            "distribution", "--lambda", "0.016", "--beta", "0.4",
            "--kappa", "0.005", "--branch", "las", "--out", prefix,
        ])
        assert rc == 1
        payload = json.load(open(prefix + "-error.json"))
        assert payload["error"] == "solver"

    def test_beta_sweep_crosses_fold_gracefully(self, tmp_path):
        # squeezing diverges at the bifurcation; the sweep keeps the roots
        # and emits nan/inf pair columns instead of aborting
        prefix = str(tmp_path / "sw")
        rc = main([
            "attractors", "--lambda", "0.016", "--sweep", "beta:0.0:0.2:9",
            "--out", prefix,
        ])
        assert rc == 0
        header, rows = read_csv(prefix + "-roots.csv")
        betas = {float(r[0]) for r in rows}
        assert len(betas) == 9

    def test_manifest_assumed_block(self, tmp_path):
        prefix = str(tmp_path / "fig2")
        rc = main(["reproduce", "fig2", "--out", prefix])
        assert rc == 0
        manifest = json.load(open(prefix + "-manifest.json"))
        assert manifest["figure"] == "fig2"
        assert "kappa_ratio" in manifest["assumed"]
        assert "exact_dim" in manifest["assumed"]
        assert manifest["residuals"]


class TestPresets:
    def test_every_figure_has_preset(self):
        for fig in ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6-neff",
                    "fig6-damping", "fig7"):
            config, assumed = PRESETS[fig]
            assert isinstance(config, ScenarioConfig)
            assert isinstance(assumed, dict)
