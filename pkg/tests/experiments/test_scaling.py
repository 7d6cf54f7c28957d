import math

import pytest

from common.config import GlueConfig, ScalingConfig
from common.errors import ConstructionError, PreconditionError
from experiments.fields import gaussian_field
from experiments.scaling import (
    build_glued_sequence,
    glue_norm_bound,
    run_scaling,
    scale_norm_check,
)


@pytest.fixture(scope="module")
def gaussian():
    return gaussian_field(64, 4.0, 4)


class TestScaleNormCheck:
    def test_plain_norm_scales_exactly(self, gaussian):
        lams = [1.0, 2.0**-4, 3.0**-4, 4.0**-4]

        report = scale_norm_check(gaussian, -1.0, 1.0, lams, beta=0.0)

        assert report.exact_exponent == pytest.approx(0.75)
        assert report.measured_exponent == pytest.approx(0.75, abs=1e-9)
        for row in report.rows:
            assert row.ratio == pytest.approx(1.0, rel=1e-9)

    def test_identity_factor(self, gaussian):
        report = scale_norm_check(gaussian, -1.0, 1.0, [1.0], beta=0.6)

        assert report.rows[0].ratio == 1.0
        assert report.measured_exponent is None

    def test_log_weight_bounded_by_prediction(self, gaussian):
        report = scale_norm_check(gaussian, -1.0, 1.0, [2.0**-4, 5.0**-4], beta=0.6)

        assert all(0 < row.ratio <= 2.1 for row in report.rows)

    @pytest.mark.parametrize(
        "omega,gamma,lams",
        [(-1.0, 2.0, [0.5]), (-1.0, 1.0, [0.0]), (-1.0, 1.0, [1.5]), (-1.0, 1.0, [-0.5])],
        ids=["not_balanced", "zero_factor", "above_one", "negative_factor"],
    )
    def test_preconditions(self, gaussian, omega, gamma, lams):
        with pytest.raises(PreconditionError):
            scale_norm_check(gaussian, omega, gamma, lams, beta=0.6)

    def test_run_scaling(self, default_params):
        report = run_scaling(default_params, ScalingConfig())

        assert report.passed
        assert [row.lam for row in report.rows] == [1.0] + [n**-4.0 for n in (2, 3, 4, 5)]
        assert report.measured_exponent == pytest.approx(report.exact_exponent, abs=5e-4)


class TestGlue:
    def test_default_sequence(self, default_params):
        report = build_glued_sequence(default_params, GlueConfig())

        assert report.passed
        assert [t.n for t in report.terms] == list(range(2, 9))
        assert all(t.lam == t.n**-4.0 for t in report.terms)

    def test_log_eps_kept_in_log_form(self, default_params):
        report = build_glued_sequence(default_params, GlueConfig(n_min=2, n_max=3))
        alpha = default_params.alpha

        assert report.terms[0].log_eps == -max(2.0**5, 2.0 ** (6 / alpha))
        assert math.isfinite(report.terms[-1].log_eps)

    def test_supports_are_disjoint(self, default_params):
        cfg = GlueConfig(gap=0.01)
        terms = build_glued_sequence(default_params, cfg).terms

        for left, right in zip(terms, terms[1:]):
            assert right.translated_support[0] == pytest.approx(
                left.translated_support[1] + cfg.gap
            )

    def test_partial_sums(self, default_params):
        terms = build_glued_sequence(default_params, GlueConfig()).terms
        sums = [t.partial_sum for t in terms]

        assert all(b > a for a, b in zip(sums, sums[1:]))
        assert sums[-1] == pytest.approx(sum(glue_norm_bound(t.n, default_params.beta) for t in terms))

    def test_lifespans_shrink(self, default_params):
        terms = build_glued_sequence(default_params, GlueConfig()).terms

        assert all(t.t_n <= t.t_bound <= 1 / t.n for t in terms)

    @pytest.mark.parametrize(
        "n_min,n_max", [(1, 4), (5, 4)], ids=["first_term", "empty_range"]
    )
    def test_preconditions(self, default_params, n_min, n_max):
        with pytest.raises(PreconditionError):
            build_glued_sequence(default_params, GlueConfig(n_min=n_min, n_max=n_max))

    def test_zero_gap_is_rejected(self, default_params):
        with pytest.raises(ConstructionError, match="overlap"):
            build_glued_sequence(default_params, GlueConfig(gap=0.0))
