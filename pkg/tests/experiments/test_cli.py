import json

import numpy as np
import pytest

from experiments.cli import (
    EXIT_FAILED,
    EXIT_IO,
    EXIT_OK,
    EXIT_PRECONDITION,
    EXIT_USAGE,
    main,
)


def _manifest(out_dir, stem):
    return json.loads((out_dir / f"{stem}.manifest.json").read_text())


@pytest.mark.integration
class TestValidate:
    def test_default_config(self, tmp_path, capsys):
        code = main(["--out", str(tmp_path), "validate"])

        assert code == EXIT_OK
        assert "config valid" in capsys.readouterr().out
        manifest = _manifest(tmp_path, "validate")
        assert manifest["passed"]
        assert manifest["config"]["params"]["lambda"] == 0.01
        assert (tmp_path / "metrics.prom").exists()

    def test_violated_constraints(self, tmp_path, write_config, capsys):
        path = write_config("[params]\nbeta = 0.4\n")

        code = main(["--config", str(path), "--out", str(tmp_path), "validate"])

        assert code == EXIT_FAILED
        assert "[params] beta > 1/2" in capsys.readouterr().out
        assert not _manifest(tmp_path, "validate")["passed"]

    def test_invalid_config_file(self, tmp_path, write_config):
        path = write_config("[dyadic]\nj_max = 40\n")

        assert main(["--config", str(path), "--out", str(tmp_path), "validate"]) == EXIT_FAILED

    def test_missing_config_file(self, tmp_path):
        code = main(["--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path), "validate"])

        assert code == EXIT_IO
        assert _manifest(tmp_path, "validate")["error"]


@pytest.mark.integration
class TestUsage:
    @pytest.mark.parametrize(
        "argv",
        [["bogus"], ["run", "nothing"], ["export"], ["--threads", "x", "validate"]],
        ids=["unknown_command", "unknown_experiment", "missing_kind", "bad_option"],
    )
    def test_usage_errors(self, argv):
        with pytest.raises(SystemExit) as exc_info:
            main(argv)

        assert exc_info.value.code == EXIT_USAGE


@pytest.mark.integration
class TestRun:
    def test_glue(self, tmp_path):
        code = main(["--out", str(tmp_path), "run", "glue"])

        assert code == EXIT_OK
        report = json.loads((tmp_path / "glue.json").read_text())
        assert report["passed"]
        assert (tmp_path / "glue-terms.csv").exists()
        manifest = _manifest(tmp_path, "run-glue")
        assert manifest["exit_code"] == EXIT_OK
        assert str(tmp_path / "glue.json") in manifest["outputs"]

    def test_csv_can_be_disabled(self, tmp_path, write_config):
        path = write_config("[output]\nwrite_csv = false\n")

        assert main(["--config", str(path), "--out", str(tmp_path), "run", "glue"]) == EXIT_OK
        assert not (tmp_path / "glue-terms.csv").exists()

    def test_inadmissible_params(self, tmp_path, write_config):
        path = write_config("[params]\nalpha = 0.05\n")

        code = main(["--config", str(path), "--out", str(tmp_path), "run", "glue"])

        assert code == EXIT_PRECONDITION
        assert "alpha > 2*delta" in _manifest(tmp_path, "run-glue")["error"]


@pytest.mark.integration
class TestExport:
    def test_profile(self, tmp_path):
        code = main(["--out", str(tmp_path), "export", "profile", "--points", "50"])

        assert code == EXIT_OK
        path = tmp_path / "profile-chi_eps.csv"
        assert path.read_text().startswith("# kind=chi_eps")
        assert np.loadtxt(path, delimiter=",", skiprows=2).shape == (50, 4)

    def test_two_dimensional_profile(self, tmp_path):
        argv = ["--out", str(tmp_path), "export", "profile", "--kind", "h_eps", "--x2", "0.01"]

        assert main(argv) == EXIT_OK
        assert "x2=0.01" in (tmp_path / "profile-h_eps.csv").read_text().splitlines()[0]

    def test_ellipse(self, tmp_path):
        code = main(["--out", str(tmp_path), "export", "ellipse", "--v", "-0.01"])

        assert code == EXIT_OK
        table = np.loadtxt(tmp_path / "ellipse.csv", delimiter=",", skiprows=1)
        assert table.shape[1] == 3
        assert np.hypot(table[:, 1], table[:, 2]).max() <= 1 + 1e-12
        assert json.loads((tmp_path / "ellipse.json").read_text())["v"] == -0.01

    def test_field_at_focus_time_is_rejected(self, tmp_path):
        code = main(["--out", str(tmp_path), "export", "field-at-t", "--t-fraction", "1"])

        assert code == EXIT_PRECONDITION
        assert "t-fraction" in _manifest(tmp_path, "export-field-at-t")["error"]
