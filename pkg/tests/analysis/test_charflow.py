import math

import numpy as np
import pytest

from analysis.charflow import (
    FieldSample,
    focusing_rate,
    focusing_rate_d1,
    refined_grid,
)
from analysis.profiles import chi_eps, chi_eps_d1
from common.errors import PreconditionError, RangeError


class TestComputeBlowup:
    def test_focuses(self, default_flow):
        eps = default_flow.params.epsilon

        assert default_flow.focuses
        assert eps / 2 < default_flow.nu_eps < 0.5
        assert default_flow.t_eps == pytest.approx(1 / (2 * default_flow.M_eps), rel=1e-15)

    def test_rate_is_maximal_at_nu(self, default_flow):
        p = default_flow.params
        ys = np.geomspace(p.epsilon / 2, 0.5, 50_000)

        assert focusing_rate(ys, p).max() <= default_flow.M_eps * (1 + 1e-9)

    def test_nu_is_stationary(self, default_flow):
        p = default_flow.params
        scale = default_flow.M_eps / default_flow.nu_eps

        assert abs(float(focusing_rate_d1(default_flow.nu_eps, p))) < 1e-6 * scale

    def test_phi_y_vanishes_at_t_eps(self, default_flow):
        phi_y = float(default_flow.phi_y(default_flow.t_eps, default_flow.nu_eps))

        assert abs(phi_y) < 1e-9

    def test_phi_y_positive_before_t_eps(self, default_flow):
        y = np.linspace(0, 0.5, 2001)
        for frac in (0.0, 0.5, 0.9, 0.999):
            assert np.all(default_flow.phi_y(frac * default_flow.t_eps, y) > 0)

    def test_no_focusing_for_large_epsilon(self, make_flow):
        flow = make_flow(epsilon=1.0)

        assert not flow.focuses
        assert math.isinf(flow.t_eps)
        assert math.isnan(flow.nu_eps)

    def test_lifespan_shrinks_with_epsilon(self, make_flow):
        times = [make_flow(epsilon=eps).t_eps for eps in (1e-2, 1e-4, 1e-6)]

        assert times[0] > times[1] > times[2]


class TestPhi:
    def test_identity_at_time_zero(self, default_flow):
        y = np.linspace(0, 0.5, 11)

        np.testing.assert_array_equal(default_flow.phi(0.0, y), y)

    def test_zero_label_moves_at_unit_speed(self, default_flow):
        assert float(default_flow.phi(0.3, 0.0)) == pytest.approx(0.3)

    def test_derivatives_match_differences(self, default_flow):
        t = 0.5 * default_flow.t_eps
        y = np.array([0.002, 0.01, 0.1, 0.3])
        h = 1e-7
        jet = default_flow.derivatives(t, y)
        phi_y = (default_flow.phi(t, y + h) - default_flow.phi(t, y - h)) / (2 * h)
        phi_yy = (default_flow.phi_y(t, y + h) - default_flow.phi_y(t, y - h)) / (2 * h)

        np.testing.assert_allclose(jet.phi_y, phi_y, rtol=1e-6)
        np.testing.assert_allclose(jet.phi_yy, phi_yy, rtol=1e-4, atol=1e-6)
        np.testing.assert_allclose(jet.phi_ty * t, jet.phi_y - 1, rtol=1e-12)

    def test_offset_matches_difference(self, default_flow):
        t = 0.7 * default_flow.t_eps
        y = np.array([0.0, 0.002, 0.05, 0.4])
        y0 = default_flow.nu_eps
        expected = default_flow.phi(t, y) - default_flow.phi(t, y0)

        np.testing.assert_allclose(default_flow.phi_offset(t, y, y0), expected, atol=1e-14)

    def test_offset_resolves_close_labels(self, default_flow):
        t = 0.9 * default_flow.t_eps
        y0 = default_flow.nu_eps
        dy = 1e-11
        offset = float(default_flow.phi_offset(t, y0 + dy, y0))

        assert offset == pytest.approx(float(default_flow.phi_y(t, y0)) * dy, rel=1e-4)


class TestInvertPhi:
    @pytest.mark.parametrize("frac", [0.0, 0.3, 0.9], ids=["t0", "mid", "late"])
    def test_round_trip(self, default_flow, frac):
        t = frac * default_flow.t_eps
        x = np.linspace(float(default_flow.phi(t, 0.0)), float(default_flow.phi(t, 0.5)), 101)

        y = default_flow.invert_phi(t, x)

        np.testing.assert_allclose(default_flow.phi(t, y), x, atol=1e-12)
        assert np.all((y >= 0) & (y <= 0.5))

    def test_rejects_late_time(self, default_flow):
        with pytest.raises(PreconditionError):
            default_flow.invert_phi(default_flow.t_eps, 0.3)

    def test_rejects_negative_time(self, default_flow):
        with pytest.raises(PreconditionError):
            default_flow.invert_phi(-0.1, 0.3)

    def test_rejects_point_outside_image(self, default_flow):
        t = 0.5 * default_flow.t_eps

        with pytest.raises(RangeError):
            default_flow.invert_phi(t, float(default_flow.phi(t, 0.5)) + 0.1)

    def test_range_error_is_precondition(self, default_flow):
        assert issubclass(RangeError, PreconditionError)

    def test_invert_offset(self, default_flow):
        t = 0.8 * default_flow.t_eps
        nu = default_flow.nu_eps
        xi = np.array([-1e-6, 0.0, 1e-6])

        y = default_flow.invert_offset(t, xi, nu, nu / 2, 2 * nu)

        np.testing.assert_allclose(default_flow.phi_offset(t, y, nu), xi, atol=1e-15)


class TestFieldSample:
    def test_initial_field_is_chi_eps(self, default_flow):
        grid = np.linspace(0, 0.5, 201)
        sample = default_flow.sample_field(0.0, grid)

        np.testing.assert_allclose(sample.v, chi_eps(grid, default_flow.params))
        np.testing.assert_allclose(sample.v_x, chi_eps_d1(grid, default_flow.params))

    def test_field_constant_along_characteristics(self, default_flow):
        t = 0.6 * default_flow.t_eps
        y = np.array([0.001, 0.01, 0.2])
        sample = default_flow.sample_field(t, default_flow.phi(t, y))

        np.testing.assert_allclose(sample.v, chi_eps(y, default_flow.params), atol=1e-12)

    def test_gradient_steepens(self, default_flow):
        nu = np.array([default_flow.nu_eps])
        early = default_flow.field_jet(0.0, nu).v_x
        late = default_flow.field_jet(0.99 * default_flow.t_eps, nu).v_x

        assert abs(late[0]) > 50 * abs(early[0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            FieldSample(t=0.0, grid=np.zeros(3), v=np.zeros(3), v_x=np.zeros(2), v_xx=np.zeros(3))

    def test_to_csv(self, default_flow, tmp_path):
        sample = default_flow.sample_field(0.1, np.linspace(0.1, 0.5, 20))

        path = sample.to_csv(tmp_path / "field.csv")

        assert path.read_text().splitlines()[1] == "x1,v,v_x,v_xx"
        assert np.loadtxt(path, delimiter=",", skiprows=2).shape == (20, 4)


class TestGrids:
    def test_refined_grid(self):
        nodes = refined_grid(0.0, 1.0, 0.3, h_max=0.01, ratio=1.05, h_min=1e-5)
        spacing = np.diff(nodes)

        assert nodes[0] == 0.0
        assert nodes[-1] == 1.0
        assert np.all(spacing > 0)
        assert spacing.max() <= 1.5 * 0.01
        assert np.min(np.abs(nodes - 0.3)) == 0.0
        assert spacing.min() < 2e-5

    def test_refined_grid_clamps_center(self):
        nodes = refined_grid(0.0, 1.0, 2.0, h_max=0.1)

        assert nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)

    def test_focus_grid(self, default_flow):
        t = 0.9 * default_flow.t_eps
        nodes = default_flow.focus_grid(t, n_uniform=100)

        assert nodes[0] == pytest.approx(float(default_flow.phi(t, 0.0)))
        assert nodes[-1] == pytest.approx(float(default_flow.phi(t, 0.5)))
        assert np.all(np.diff(nodes) > 0)

    def test_focus_grid_without_focusing(self, make_flow):
        nodes = make_flow(epsilon=1.0).focus_grid(0.1, n_uniform=50)

        assert len(nodes) == 50

    def test_comparison_bounds(self, default_flow):
        eta = default_flow.nu_eps / 4
        low, high = default_flow.comparison_bounds(eta, [1e-2, 1e-3, 1e-4])

        assert 0 < low <= high < math.inf
