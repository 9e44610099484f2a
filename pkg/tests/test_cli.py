import json
import math

import pytest

from blosense import cli
from blosense.model import SqueezeParams, fit_params
from blosense.report import read_manifest, read_report
from blosense.scenario import (
    Scenario,
    ScenarioError,
    parse_scenario,
    scenario_from_mapping,
    scenario_to_mapping,
)

FAST = """
[source]
squeezing_db = 3.9
antisqueezing_db = 5.24
[blo]
gain = 0.6
[run]
sample_rate = 2e6
duration = 0.1
[spectrum]
f_hi = 900e3
sweep_time = 0.1
[sweep]
point_duration = 2e-3
theta_points = 6
g2_grid = 0, 0.5, 1
"""


def write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    doc = json.loads(err.strip().splitlines()[-1])
    assert set(doc) == {"error", "exit", "message"}
    return doc


class TestScenarioFile:
    def test_minimal_file(self, tmp_path):
        s = parse_scenario(write(tmp_path, "[source]\nsqueezing_db = 5.9\nantisqueezing_db = 11.6\n"))
        assert s.params.extra_noise == pytest.approx(21.13, abs=0.01)
        assert s.spectrum == Scenario().spectrum
        assert s.seed == Scenario().seed

    def test_empty_file_is_defaults(self, tmp_path):
        assert parse_scenario(write(tmp_path, "")) == Scenario()
        assert Scenario().params == fit_params(3.9, 5.24)
        assert Scenario().signal.amplitude == 1.0

    def test_unphysical_levels_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="Ne >= 0") as err:
            parse_scenario(write(tmp_path, "[source]\nsqueezing_db = 5.9\nantisqueezing_db = 3\n"))
        assert err.value.kind == "validation"

    def test_consistent_r_accepted(self, tmp_path):
        p = fit_params(3.9, 5.24)
        text = f"[source]\nsqueezing_db = 3.9\nantisqueezing_db = 5.24\nr = {p.r!r}\nextra_noise = {p.extra_noise!r}\n"
        assert parse_scenario(write(tmp_path, text)).params == p

    def test_inconsistent_r_rejected(self, tmp_path):
        text = "[source]\nsqueezing_db = 3.9\nantisqueezing_db = 5.24\nr = 0.3\n"
        with pytest.raises(ScenarioError, match="inconsistent"):
            parse_scenario(write(tmp_path, text))

    def test_r_form(self, tmp_path):
        s = parse_scenario(write(tmp_path, "[source]\nr = 0.5\n"))
        assert s.params == SqueezeParams(r=0.5)

    def test_half_db_pair_rejected(self, tmp_path):
        with pytest.raises(ScenarioError, match="together"):
            parse_scenario(write(tmp_path, "[source]\nsqueezing_db = 3.9\n"))

    @pytest.mark.parametrize("text", ["[source]\nsqueezing = 3\n", "[sauce]\nr = 1\n", "[blo]\ngain = abc\n",
                                      "no section header\n", "[blo]\ngain = nan\n"])
    def test_parse_errors(self, tmp_path, text):
        with pytest.raises(ScenarioError) as err:
            parse_scenario(write(tmp_path, text))
        assert err.value.kind == "parse"

    @pytest.mark.parametrize("text", ["[signal]\nfrequency = 15e6\n", "[run]\nseed = -1\n",
                                      "[spectrum]\nvbw = 1e5\n", "[detection]\nefficiency = 1.5\n",
                                      "[source]\nr = -0.1\n"])
    def test_validation_errors(self, tmp_path, text):
        with pytest.raises(ScenarioError) as err:
            parse_scenario(write(tmp_path, text))
        assert err.value.kind == "validation"

    def test_inline_comments_and_sweep_grid(self, tmp_path):
        s = parse_scenario(write(tmp_path, FAST.replace("gain = 0.6", "gain = 0.6  # idler LO")))
        assert s.blo.gain == 0.6
        assert s.sweep.g2_grid == (0.0, 0.5, 1.0)

    def test_mapping_echo_round_trips(self, tmp_path):
        s = parse_scenario(write(tmp_path, FAST + "[detection]\nefficiency = 0.9\n"))
        assert scenario_from_mapping(scenario_to_mapping(s)) == s


class TestCommands:
    def test_analytic(self, tmp_path, capsys):
        code, out, _ = run(["--out", tmp_path, "analytic", "--squeezing-db", "3.0103"], capsys)
        assert code == 0
        assert "g_opt=0.6" in out
        assert "min_conditional_db=-0.9691" in out
        assert (tmp_path / "analytic.csv").exists()

    def test_fit(self, tmp_path, capsys):
        code, out, _ = run(["--out", tmp_path, "fit", "5.9", "11.6"], capsys)
        assert code == 0
        vals = dict(line.split("=") for line in out.split())
        assert float(vals["e_minus_2r"]) == pytest.approx(0.25704, abs=1e-5)
        assert float(vals["extra_noise"]) == pytest.approx(21.1, abs=0.2)
        assert read_report(tmp_path / "fit.csv").metadata["squeezing_db"] == 5.9

    def test_fit_unphysical_is_validation_error(self, tmp_path, capsys):
        code, _, err = run(["--out", tmp_path, "fit", "5.9", "3"], capsys)
        assert code == 3
        doc = error_of(err)
        assert doc["exit"] == 3 and "Ne >= 0" in doc["message"]

    def test_usage_errors(self, tmp_path, capsys):
        assert run(["frobnicate"], capsys)[0] == 2
        assert run(["fit", "1.0"], capsys)[0] == 2
        code, _, err = run(["--seed", "xyz", "analytic"], capsys)
        assert code == 2 and error_of(err)["error"] == "usage"

    def test_scenario_parse_error_exit(self, tmp_path, capsys):
        code, _, err = run(["--scenario", write(tmp_path, "[blo]\nbogus = 1\n"), "--out", tmp_path, "analytic"], capsys)
        assert code == 2
        assert "blo.bogus" in error_of(err)["message"]

    def test_missing_scenario_file(self, tmp_path, capsys):
        assert run(["--scenario", tmp_path / "nope.ini", "analytic"], capsys)[0] == 2

    def test_bad_seed_is_validation(self, tmp_path, capsys):
        assert run(["--seed", "-5", "--out", tmp_path, "analytic"], capsys)[0] == 3

    def test_unwritable_out_is_runtime(self, tmp_path, capsys):
        blocker = write(tmp_path, "", "blocker")
        code, _, err = run(["--out", blocker / "x", "fit", "3.9", "5.24"], capsys)
        assert code == 4 and error_of(err)["error"] == "io"

    def test_env_out_directory(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
        assert run(["fit", "3.9", "5.24"], capsys)[0] == 0
        assert (tmp_path / "envout" / "fit.csv").exists()

    def test_default_out_directory(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv(cli.OUT_ENV, raising=False)
        monkeypatch.chdir(tmp_path)
        assert run(["fit", "3.9", "5.24"], capsys)[0] == 0
        assert (tmp_path / "blosense-out" / "fit.manifest").exists()

    def test_json_format(self, tmp_path, capsys):
        assert run(["--out", tmp_path, "--format", "json", "fit", "3.9", "5.24"], capsys)[0] == 0
        assert read_report(tmp_path / "fit.json").kind == "fit"

    @pytest.mark.parametrize("command", ["sweep-phase", "sweep-gain", "calibrate-sql"])
    def test_seeded_reruns_are_byte_identical(self, tmp_path, capsys, command):
        scn = write(tmp_path, FAST)
        for sub in ("a", "b"):
            assert run(["--scenario", scn, "--seed", "123", "--out", tmp_path / sub, command], capsys)[0] == 0
        for suffix in (".csv", ".manifest"):
            a = (tmp_path / "a" / f"{command}{suffix}").read_bytes()
            b = (tmp_path / "b" / f"{command}{suffix}").read_bytes()
            assert a == b
        assert read_manifest(tmp_path / "a" / f"{command}.manifest")["scenario.run.seed"] == "123"

    def test_different_seed_differs(self, tmp_path, capsys):
        scn = write(tmp_path, FAST)
        for seed in ("1", "2"):
            run(["--scenario", scn, "--seed", seed, "--out", tmp_path / seed, "sweep-phase"], capsys)
        assert (tmp_path / "1" / "sweep-phase.csv").read_bytes() != (tmp_path / "2" / "sweep-phase.csv").read_bytes()

    def test_spectrum_report(self, tmp_path, capsys):
        code, out, _ = run(["--scenario", write(tmp_path, FAST), "--out", tmp_path, "spectrum", "--gain", "0.7"], capsys)
        assert code == 0
        vals = dict(line.split("=") for line in out.split())
        assert {"vacuum.snr_db", "optimized.floor_db", "snr_improvement_db"} <= set(vals)
        t = read_report(tmp_path / "spectrum.csv")
        assert list(t.columns) == ["vacuum_db", "squeezed_db", "optimized_db", "sql_raw"]
        assert t.metadata["optimized.gain_g"] == 0.7
        assert math.isclose(t.metadata["snr_improvement_db"], float(vals["snr_improvement_db"]), rel_tol=1e-5)

    def test_dispatch_rejects_unknown(self, tmp_path):
        with pytest.raises(cli.UsageError):
            cli.dispatch("nope", Scenario(), tmp_path)
