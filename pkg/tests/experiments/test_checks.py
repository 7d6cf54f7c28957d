import pytest

from common.models import Limiter
from experiments.checks import fd_checks, geometry_checks, norms_selftest


def _named(report, name):
    (result,) = [c for c in report.checks if c.name == name]
    return result


class TestGeometryChecks:
    def test_reduced_run(self, fast_config):
        report = geometry_checks(fast_config, threads=2, seed=0)

        assert report.passed
        assert len(report.ellipse) == 5
        assert report.appendix.samples == 200
        assert report.appendix.failures == 0
        assert report.speed_bound_max_excess <= 1e-12
        assert len(report.clearance) == 5

    def test_seed_reproducible(self, fast_config):
        first = geometry_checks(fast_config, threads=1, seed=4)
        second = geometry_checks(fast_config, threads=3, seed=4)

        assert first.speed_bound_max_excess == second.speed_bound_max_excess
        assert first.appendix == second.appendix


class TestFDChecks:
    def test_reduced_run(self, fast_config):
        report = fd_checks(fast_config)

        assert report.epsilon == 0.05
        assert len(report.levels) == 3
        assert len(report.residual_levels) == 4
        assert report.scaled_residual_gap <= 1e-9
        for name in (
            "sup error decreasing",
            "observed order",
            "maximum principle",
            "zero data stays zero",
            "scaled residual",
        ):
            assert _named(report, name).passed, name
        assert report.limiter is Limiter.MINMOD
        assert report.levels[-1].order >= 0.9
        assert _named(report, "observed order").threshold == 0.9

    @pytest.mark.slow
    def test_default_run(self, make_config):
        report = fd_checks(make_config())

        assert report.passed


class TestNormsSelftest:
    def test_reduced_run(self, make_config):
        cfg = make_config("[selftest]\nrandom_fields = 5\ncross_n = 64\n")

        report = norms_selftest(cfg, seed=1)

        assert len(report.gaussian) == 4
        assert len(report.cross_method) == 5
        for name in (
            "Gaussian closed form",
            "Plancherel",
            "log norm below plain norm",
            "compact support upgrade",
            "kernel vs Fourier",
            "halving h reduces disagreement",
        ):
            assert _named(report, name).passed, name
        for row in report.cross_method:
            assert row.reduction >= 1.8, row.field

    def test_runtime_is_informational(self, make_config):
        report = norms_selftest(make_config("[selftest]\nrandom_fields = 2\ncross_n = 64\n"))

        assert not _named(report, "runtime").required

    @pytest.mark.slow
    def test_default_run(self, make_config):
        report = norms_selftest(make_config())

        assert report.passed
