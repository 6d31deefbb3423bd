"""Command-line interface: configs, overrides, outputs, exit codes."""

import csv

import pytest

from bfssd import METHODS, PROBLEMS
from bfssd.cli import main

TINY_CONFIG = """\
[experiment]
name = "tiny"
problem = "worst"
trials = 2
base_seed = 1000
budget = 300.0
grid = [50.0, 250.0]

[problem]
dim = 60
r_hf = 10
r_lf = 2
L = 20.0

[methods.gd]
method = "gd"
ell = 10
fixed_step = 0.05

[methods.bf]
method = "bf_ssd"
ell = 10
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_CONFIG)
    return path


class TestListing:
    def test_list_methods(self, capsys):
        assert main(["list-methods"]) == 0
        out = capsys.readouterr().out.split()
        assert out == sorted(METHODS)
        assert len(out) == 9

    def test_list_problems(self, capsys):
        assert main(["list-problems"]) == 0
        out = capsys.readouterr().out
        for name in PROBLEMS:
            assert name in out
        assert "dim" in out  # parameter hints

    def test_help_available(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0


class TestRun:
    def test_writes_output_tree(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", "--config", str(tiny_config), "--out", str(out)]) == 0
        base = out / "tiny"
        assert (base / "summary.csv").exists()
        assert (base / "table.csv").exists()
        assert (base / "curves.svg").exists()
        assert (base / "config.toml").exists()
        for label in ("gd", "bf"):
            assert (base / label / "trial_0.csv").exists()
            assert (base / label / "trial_1.csv").exists()
        stdout = capsys.readouterr().out
        assert "mean_50" in stdout
        assert "outputs written to" in stdout

    def test_set_override(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--config",
                str(tiny_config),
                "--set",
                "trials=1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert (out / "tiny" / "gd" / "trial_0.csv").exists()
        assert not (out / "tiny" / "gd" / "trial_1.csv").exists()

    def test_dotted_override_reaches_method_table(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        code = main(
            [
                "run",
                "--config",
                str(tiny_config),
                "--set",
                "methods.gd.fixed_step=0.01",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        echoed = (out / "tiny" / "config.toml").read_text()
        assert "fixed_step = 0.01" in echoed

    def test_seed_flag_overrides_base_seed(self, tiny_config, tmp_path):
        out = tmp_path / "out"
        code = main(
            ["run", "--config", str(tiny_config), "--seed", "42", "--out", str(out)]
        )
        assert code == 0
        assert "base_seed = 42" in (out / "tiny" / "config.toml").read_text()

    def test_echoed_config_reproduces_run(self, tiny_config, tmp_path):
        """config.toml is a complete record: re-running from it gives
        byte-identical summaries."""
        first = tmp_path / "first"
        second = tmp_path / "second"
        assert main(["run", "--config", str(tiny_config), "--out", str(first)]) == 0
        echoed = first / "tiny" / "config.toml"
        assert main(["run", "--config", str(echoed), "--out", str(second)]) == 0
        assert (first / "tiny" / "summary.csv").read_bytes() == (
            second / "tiny" / "summary.csv"
        ).read_bytes()
        assert (first / "tiny" / "gd" / "trial_1.csv").read_bytes() == (
            second / "tiny" / "gd" / "trial_1.csv"
        ).read_bytes()

    def test_workers_flag_preserves_results(self, tiny_config, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["run", "--config", str(tiny_config), "--out", str(a)]) == 0
        code = main(
            ["run", "--config", str(tiny_config), "--out", str(b), "--workers", "2"]
        )
        assert code == 0
        assert (a / "tiny" / "summary.csv").read_bytes() == (
            b / "tiny" / "summary.csv"
        ).read_bytes()


class TestRunErrors:
    def test_missing_config_flag(self, capsys):
        assert main(["run"]) == 1
        assert "config" in capsys.readouterr().err

    def test_nonexistent_config(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.toml")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_malformed_toml(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("[experiment\nname = oops")
        assert main(["run", "--config", str(path)]) == 1
        assert "malformed" in capsys.readouterr().err

    def test_unknown_method_lists_valid_names(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(
            TINY_CONFIG.replace('method = "gd"', 'method = "adam"')
        )
        assert main(["run", "--config", str(path)]) == 1
        err = capsys.readouterr().err
        assert "adam" in err
        assert "bf_ssd" in err

    def test_unknown_section(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(TINY_CONFIG + "\n[linesearch]\nbeta = 0.1\n")
        assert main(["run", "--config", str(path)]) == 1
        assert "unknown config section" in capsys.readouterr().err

    def test_unknown_experiment_key(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(TINY_CONFIG.replace("trials = 2", "runs = 2"))
        assert main(["run", "--config", str(path)]) == 1
        assert "unknown keys in [experiment]" in capsys.readouterr().err

    def test_unknown_method_key(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(TINY_CONFIG.replace("ell = 10\nfixed_step", "ele = 10\nfixed_step"))
        assert main(["run", "--config", str(path)]) == 1
        assert "methods.gd" in capsys.readouterr().err

    def test_unknown_problem_param(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(TINY_CONFIG.replace("dim = 60", "size = 60"))
        assert main(["run", "--config", str(path)]) == 1
        assert "[problem]" in capsys.readouterr().err

    def test_runtime_abort_exits_two(self, tmp_path, capsys):
        """A config that parses cleanly but cannot run (fixed-step method
        with no step) surfaces as exit code 2 naming the trial."""
        path = tmp_path / "abort.toml"
        path.write_text(
            TINY_CONFIG.replace("method = \"gd\"\nell = 10\nfixed_step = 0.05", "method = \"gd\"\nell = 10")
        )
        assert main(["run", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "runtime abort" in err
        assert "seed 1000" in err


class TestPreset:
    def test_preset_runs_with_overrides(self, tmp_path, capsys):
        path = tmp_path / "preset.toml"
        path.write_text(
            '[experiment]\npreset = "worst_main"\nname = "main_small"\n'
            "trials = 1\nbudget = 120.0\ngrid = [50.0, 100.0]\n"
        )
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out)]) == 0
        rows = list(csv.reader((out / "main_small" / "table.csv").open()))
        assert len(rows) == 1 + 9  # header plus all nine methods

    def test_unknown_preset(self, tmp_path, capsys):
        path = tmp_path / "preset.toml"
        path.write_text('[experiment]\npreset = "warst_main"\n')
        assert main(["run", "--config", str(path)]) == 1
        assert "unknown preset" in capsys.readouterr().err

    def test_preset_rejects_extra_sections(self, tmp_path, capsys):
        path = tmp_path / "preset.toml"
        path.write_text(
            '[experiment]\npreset = "worst_main"\n\n[methods.gd]\nmethod = "gd"\n'
        )
        assert main(["run", "--config", str(path)]) == 1
        assert "preset" in capsys.readouterr().err


class TestInspectSurrogate:
    def test_writes_profile(self, tmp_path, capsys):
        code = main(
            [
                "inspect-surrogate",
                "--ell",
                "10",
                "--samples",
                "21",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        path = tmp_path / "surrogate_worst_ell10_seed0.csv"
        assert path.exists()
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == 21
        assert set(rows[0]) == {"alpha", "surrogate_value", "hf_value"}
        # the profile starts at the shared base point
        assert float(rows[0]["surrogate_value"]) == float(rows[0]["hf_value"])
        assert "rho" in capsys.readouterr().out
