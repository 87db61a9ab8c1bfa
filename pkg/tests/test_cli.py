import json

import numpy as np
import pytest

from spectralsde.cli import main

CONFIG = """
seed = 424242
paths = 20
iota = 0.25
n_levels = [2, 4]

[lambda]
type = "powerlaw"
scale = 1.0
exponent = 2.0
count = 3

[q]
type = "powerlaw"
scale = 1.0
exponent = 2.0
count = 2

[diffusion]
type = "additive"
sigma = [1.0, 0.5]

[xi]
type = "explicit"
values = [0.5, -0.25, 0.1]
"""

LINEAR_CONFIG = CONFIG.replace(
    '[diffusion]\ntype = "additive"\nsigma = [1.0, 0.5]',
    '[diffusion]\ntype = "linear"\ngamma = [0.4, 0.2]\nrho = [0.5, -0.25]',
)


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG)
    return path


def _run(args) -> int:
    return main([str(a) for a in args])


class TestCheckLemma:
    def test_margins_non_negative(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        assert _run(["check-lemma", "--config", cfg_file, "--out-dir", out]) == 0
        rows = (out / "weights.csv").read_text().strip().splitlines()
        assert rows[0] == "j,lambda,ell,i,weight_sum,bound,margin"
        assert len(rows) == 1 + 3 * (2 + 4)
        for row in rows[1:]:
            assert float(row.split(",")[-1]) >= 0.0

    def test_manifest_written(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        _run(["check-lemma", "--config", cfg_file, "--out-dir", out])
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["counts"] == {"N": 4, "J": 3, "L": 2}
        assert manifest["subcommand"] == "check-lemma"
        assert len(manifest["config_digest"]) == 64


class TestSimulate:
    def test_byte_identical_reruns(self, cfg_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        _run(["simulate", "--config", cfg_file, "--out-dir", a])
        _run(["simulate", "--config", cfg_file, "--out-dir", b])
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()

    def test_seed_override_changes_output(self, cfg_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        _run(["simulate", "--config", cfg_file, "--out-dir", a])
        _run(["simulate", "--config", cfg_file, "--out-dir", b, "--seed", "1"])
        assert (a / "trajectory.csv").read_bytes() != (b / "trajectory.csv").read_bytes()

    def test_increment_dump(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        _run(["simulate", "--config", cfg_file, "--out-dir", out, "--paths", "2",
              "--dump-increments"])
        rows = (out / "increments.csv").read_text().strip().splitlines()
        assert rows[0] == "path,level,merged_step,value"
        assert len(rows) == 1 + 2 * 2 * 4  # paths * levels * merged steps

    def test_trajectory_row_count(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        _run(["simulate", "--config", cfg_file, "--out-dir", out, "--paths", "3"])
        rows = (out / "trajectory.csv").read_text().strip().splitlines()
        assert len(rows) == 1 + 3 * 5 * 3  # paths * (N+1) * J


class TestOracle:
    def test_matches_library(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        assert _run(["oracle", "--config", cfg_file, "--out-dir", out]) == 0
        from spectralsde import exact_second_moments
        from spectralsde.cli import _build_problem
        from spectralsde.config import parse_config_file

        inp = _build_problem(parse_config_file(cfg_file))
        expect = exact_second_moments(inp).values
        rows = (out / "moments.csv").read_text().strip().splitlines()[1:]
        got = np.full_like(expect, np.nan)
        for row in rows:
            eta, _tau, j, val = row.split(",")
            got[int(eta), int(j) - 1] = float(val)
        assert np.array_equal(got, expect)

    def test_linear_config_rejected(self, tmp_path):
        path = tmp_path / "linear.toml"
        path.write_text(LINEAR_CONFIG)
        out = tmp_path / "out"
        assert _run(["oracle", "--config", path, "--out-dir", out]) == 1


class TestMaxreg:
    def test_additive_verdict_exact(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        assert _run(["maxreg", "--config", cfg_file, "--out-dir", out]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["verdict"] == "holds (exact)"
        assert report["exact_companion"]["margin_conv"] > 0.0
        rows = (out / "moments.csv").read_text().strip().splitlines()
        assert rows[0] == "eta,tau,dtau,lhs_term_full,lhs_term_conv"
        assert len(rows) == 1 + 4

    def test_linear_verdict_mc(self, tmp_path):
        path = tmp_path / "linear.toml"
        path.write_text(LINEAR_CONFIG.replace("paths = 20", "paths = 400"))
        out = tmp_path / "out"
        assert _run(["maxreg", "--config", path, "--out-dir", out]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["mode"] == "mc"
        assert report["verdict"] == "holds (mc, 4se gate)"
        assert "exact_companion" not in report

    def test_byte_identical_across_threads(self, cfg_file, tmp_path):
        outs = []
        for k, threads in enumerate(("1", "2", "8")):
            out = tmp_path / f"t{k}"
            _run(["maxreg", "--config", cfg_file, "--out-dir", out, "--threads", threads])
            outs.append(out)
        ref_report = (outs[0] / "report.json").read_bytes()
        ref_moments = (outs[0] / "moments.csv").read_bytes()
        for out in outs[1:]:
            assert (out / "report.json").read_bytes() == ref_report
            assert (out / "moments.csv").read_bytes() == ref_moments


class TestCompareUniform:
    def test_reports_side_by_side(self, cfg_file, tmp_path):
        out = tmp_path / "out"
        assert _run(["compare-uniform", "--config", cfg_file, "--out-dir", out]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["coupled"] is True
        assert report["uniform_steps"] == 3  # round((2 + 4) / 2)
        assert report["nonuniform"]["verdict"] == "holds (exact)"
        assert report["uniform"]["verdict"] == "holds (exact)"


class TestErrors:
    def test_invalid_config_exits_nonzero(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(CONFIG.replace("iota = 0.25", "iota = 0.9"))
        code = _run(["maxreg", "--config", path, "--out-dir", tmp_path / "out"])
        assert code == 1
        err = capsys.readouterr().err
        payload = json.loads(err)
        assert payload["error"]["type"] == "ValidationError"
        assert "iota" in payload["error"]["message"]
