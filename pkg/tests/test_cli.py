from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest

from fracheat import cli
from fracheat.errors import UsageError
from fracheat.experiments import STUDY_DEFAULTS, StudyConfig, StudyReport
from fracheat.spectral import read_field
from fracheat.specfun import mittag_leffler


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def only_run_dir(tmp_path):
    dirs = [d for d in tmp_path.iterdir() if d.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


class TestParseConfig:
    def test_defaults(self):
        assert cli.parse_config() == StudyConfig()

    def test_precedence(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# comment\nn = 128   # inline\nalpha = 0.7\nT = 0.3\n")
        cfg = cli.parse_config(path, {"T": "0.2"}, "scaling")
        assert cfg.n == 128 and cfg.alpha == 0.7
        assert cfg.T == 0.2
        assert cfg.amplitude == STUDY_DEFAULTS["scaling"]["amplitude"]
        assert cfg.M == STUDY_DEFAULTS["scaling"]["M"]

    def test_file_overrides_study_default(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("M = 8\n")
        assert cli.parse_config(path, study="scaling").M == 8

    @pytest.mark.parametrize("flags,key", [
        ({"bogus": "1"}, "bogus"),
        ({"n": "12.5"}, "n"),
        ({"alpha": "half"}, "alpha"),
        ({"homogeneous": "maybe"}, "homogeneous"),
    ])
    def test_bad_keys(self, flags, key):
        with pytest.raises(UsageError) as info:
            cli.parse_config(flags=flags)
        assert info.value.key == key

    def test_range_errors_are_usage_errors(self):
        with pytest.raises(UsageError):
            cli.parse_config(flags={"alpha": "1.5"})
        with pytest.raises(UsageError):
            cli.parse_config(flags={"n": "7"})

    def test_require_admissible(self):
        with pytest.raises(UsageError):
            cli.parse_config(flags={"s": "-0.9"}, require_admissible=True)
        cfg = cli.parse_config(flags={"s": "-0.9", "force": "true"}, require_admissible=True)
        assert cfg.force

    def test_missing_file(self, tmp_path):
        with pytest.raises(UsageError):
            cli.parse_config(tmp_path / "nope.cfg")

    def test_bool_spellings(self):
        assert cli.parse_config(flags={"homogeneous": "yes"}).homogeneous
        assert not cli.parse_config(flags={"homogeneous": "off"}).homogeneous


class TestSpecfun:
    def test_mittag_leffler_csv(self, capsys):
        code, out, _ = run(["specfun", "mittag_leffler", "--alpha", "0.5", "--negate", "1", "2"], capsys)
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["x"] for r in rows] == ["1.0", "2.0"]
        assert float(rows[0]["value"]) == pytest.approx(mittag_leffler(0.5, 1.0, -1.0), rel=1e-15)
        assert float(rows[0]["value"]) == pytest.approx(math.exp(1) * math.erfc(1), rel=1e-12)

    def test_gamma_and_moment(self, capsys):
        code, out, _ = run(["specfun", "gamma", "0.5"], capsys)
        assert code == 0 and float(out.splitlines()[1].split(",")[1]) == pytest.approx(math.sqrt(math.pi))
        code, out, _ = run(["specfun", "wright_moment", "--alpha", "0.5", "1"], capsys)
        assert float(out.splitlines()[1].split(",")[1]) == pytest.approx(1 / math.gamma(1.5))

    def test_bad_choice_exits_2(self, capsys):
        with pytest.raises(SystemExit) as info:
            cli.main(["specfun", "zeta", "1"])
        assert info.value.code == 2


class TestRunCommands:
    def test_solve_run_dir(self, tmp_path, capsys):
        code, out, _ = run(["solve", "--n", 64, "--M", 4, "--amplitude", 0.1, "--out", tmp_path], capsys)
        assert code == 0
        rd = only_run_dir(tmp_path)
        assert out.strip() == str(rd)
        man = json.loads((rd / "manifest.json").read_text())
        assert man["command"] == "solve"
        assert man["config"]["n"] == 64 and man["config"]["M"] == 4
        assert man["verdicts"]["verdict"] == "converged"
        assert "data_spec" in man["input_hashes"]
        for name in ["iterations.csv", "times.csv", "node_0004.bin"]:
            assert name in man["outputs"] and (rd / name).is_file()
        f = read_field(rd / "node_0001.bin")
        assert f.grid.n == 64 and np.all(np.isfinite(f.values))

    def test_solve_inadmissible_exit_2(self, tmp_path, capsys):
        code, _, err = run(["solve", "--n", 64, "--M", 4, "--s", -0.9, "--out", tmp_path], capsys)
        assert code == 2 and "usage error" in err
        assert not tmp_path.exists() or not any(tmp_path.iterdir())

    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text("colour = red\n")
        code, _, err = run(["norms", "--config", path, "--out", tmp_path / "runs"], capsys)
        assert code == 2 and "colour" in err

    def test_norms_and_manifest_hash(self, tmp_path, capsys):
        path = tmp_path / "c.cfg"
        path.write_text("n = 128\ndata = dirac\namplitude = 1\np = 1\nq = 1\ns = 0\n")
        code, _, _ = run(["norms", "--config", path, "--out", tmp_path / "runs"], capsys)
        assert code == 0
        rd = only_run_dir(tmp_path / "runs")
        rows = list(csv.DictReader(open(rd / "norms.csv")))
        assert float(rows[0]["value"]) == pytest.approx(1.0)
        man = json.loads((rd / "manifest.json").read_text())
        assert man["input_hashes"]["config"] == cli._hash_text(path.read_text())

    def test_apply_writes_fields(self, tmp_path, capsys):
        code, _, _ = run(["apply", "--op", "heat", "--t", 0.5, 1.0, "--n", 64, "--out", tmp_path], capsys)
        assert code == 0
        rd = only_run_dir(tmp_path)
        rows = list(csv.DictReader(open(rd / "apply.csv")))
        assert len(rows) == 2
        # heat flow conserves the integral of the Gaussian datum
        assert float(rows[1]["integral"]) == pytest.approx(float(rows[0]["integral"]), rel=1e-12)
        assert float(rows[1]["integral"]) == pytest.approx(0.1 * math.sqrt(2 * math.pi), rel=1e-6)

    def test_failed_verification_exit_1(self, tmp_path, capsys, monkeypatch):
        def fake(cfg):
            return StudyReport("smoothing", rows=[dict(t=1.0, v=2.0)], checks={"slope": False})
        monkeypatch.setitem(cli.STUDIES, "verify-smoothing", ("smoothing", fake))
        code, out, _ = run(["verify-smoothing", "--out", tmp_path], capsys)
        assert code == 1
        assert "slope: FAIL" in out
        man = json.loads((only_run_dir(tmp_path) / "manifest.json").read_text())
        assert man["verdicts"]["passed"] is False

    def test_study_command_failure_is_not_exit_1(self, tmp_path, capsys, monkeypatch):
        def fake(cfg):
            return StudyReport("global", rows=[dict(t=1.0, v=2.0)], checks={"converged": False})
        monkeypatch.setitem(cli.STUDIES, "global", ("global", fake))
        code, _, _ = run(["global", "--out", tmp_path], capsys)
        assert code == 0

    def test_plot(self, tmp_path, capsys):
        run(["solve", "--n", 64, "--M", 4, "--amplitude", 0.1, "--out", tmp_path], capsys)
        rd = only_run_dir(tmp_path)
        code, out, _ = run(["plot", rd], capsys)
        assert code == 0
        svg = rd / "iterations.svg"
        assert svg.is_file() and svg.read_text().lstrip().startswith("<?xml")

    def test_plot_missing_dir(self, tmp_path, capsys):
        code, _, _ = run(["plot", tmp_path / "absent"], capsys)
        assert code == 2


class TestCsv:
    def test_repr_precision(self, tmp_path):
        path = tmp_path / "t.csv"
        cli.write_csv(path, [dict(a=0.1 + 0.2, b="x"), dict(a=1 / 3, c=[1, 2])])
        rows = list(csv.DictReader(open(path)))
        assert float(rows[0]["a"]) == 0.1 + 0.2
        assert float(rows[1]["a"]) == 1 / 3
        assert rows[1]["c"] == "[1, 2]" and rows[0]["c"] == ""
