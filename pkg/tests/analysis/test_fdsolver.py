import numpy as np
import pytest

from analysis.fdsolver import (
    characteristic_error,
    flux,
    flux_speed,
    reconstruct_u_exact,
    reconstruct_u_fd,
    residual_check,
    residual_field,
    scaled_residual_check,
    solve_factored,
)
from analysis.profiles import chi_eps
from common.errors import CFLViolationError, NumericalError, PreconditionError
from common.models import FDConfig, Limiter


def _profile_ic(flow):
    return lambda x: chi_eps(x, flow.params)


class TestFlux:
    def test_zero(self):
        assert flux(np.array([0.0]))[0] == 0.0
        assert flux_speed(np.array([0.0]))[0] == 1.0

    def test_speed_is_derivative(self):
        v = np.array([-0.5, -0.01, 0.0, 0.2])
        h = 1e-6

        np.testing.assert_allclose(
            flux_speed(v), (flux(v + h) - flux(v - h)) / (2 * h), rtol=1e-8
        )

    def test_speed_positive(self):
        assert np.all(flux_speed(np.linspace(-0.99, 0.99, 101)) > 0)


class TestSolveFactored:
    def test_zero_data_stays_zero(self):
        solution = solve_factored(np.zeros_like, FDConfig(h=0.01, t_final=0.2, snapshots=5))

        assert np.all(solution.values == 0)
        assert solution.times[-1] == pytest.approx(0.2)

    def test_zero_final_time(self):
        solution = solve_factored(np.zeros_like, FDConfig(h=0.01, t_final=0.0))

        assert solution.steps == 0
        assert len(solution.times) == 1

    def test_rejects_time_near_focus(self):
        with pytest.raises(PreconditionError, match="t_eps"):
            solve_factored(np.zeros_like, FDConfig(h=0.01, t_final=0.95), t_eps=1.0)

    def test_rejects_large_initial_field(self):
        with pytest.raises(PreconditionError, match=r"\|v\| < 1"):
            solve_factored(lambda x: np.full_like(x, -1.0), FDConfig(h=0.01, t_final=0.1))

    def test_cfl_violation(self):
        with pytest.raises(CFLViolationError) as exc_info:
            solve_factored(np.zeros_like, FDConfig(h=0.01, t_final=0.1), speed_bound=0.5)

        assert exc_info.value.step == 0
        assert exc_info.value.ratio > 0.4
        assert isinstance(exc_info.value, NumericalError)

    def test_error_decreases_under_refinement(self, fd_flow):
        eps = fd_flow.params.epsilon
        t_final = 0.25 * fd_flow.t_eps
        errors = []
        for k in (16, 32, 64):
            solution = solve_factored(
                _profile_ic(fd_flow), FDConfig(h=eps / k, t_final=t_final), t_eps=fd_flow.t_eps
            )
            errors.append(characteristic_error(solution, fd_flow))

        assert errors[0] > errors[1] > errors[2]

    @pytest.mark.parametrize("limiter", [Limiter.NONE, Limiter.MINMOD], ids=["upwind", "minmod"])
    def test_maximum_principle(self, fd_flow, limiter):
        eps = fd_flow.params.epsilon
        cfg = FDConfig(h=eps / 8, t_final=0.5 * fd_flow.t_eps, limiter=limiter)
        solution = solve_factored(_profile_ic(fd_flow), cfg, t_eps=fd_flow.t_eps)
        lowest = float(np.min(chi_eps(solution.grid, fd_flow.params)))

        assert solution.values.min() >= lowest - 1e-12
        assert solution.values.max() <= 1e-12

    def test_inflow_node_held(self, fd_flow):
        cfg = FDConfig(h=0.01, t_final=0.3 * fd_flow.t_eps, snapshots=3)
        solution = solve_factored(_profile_ic(fd_flow), cfg, t_eps=fd_flow.t_eps)

        np.testing.assert_array_equal(solution.values[:, 0], 0.0)


class TestFDSolution:
    @pytest.fixture
    def solution(self, fd_flow):
        cfg = FDConfig(h=0.01, t_final=0.3 * fd_flow.t_eps, snapshots=4)
        return solve_factored(_profile_ic(fd_flow), cfg, t_eps=fd_flow.t_eps)

    def test_stored_levels(self, solution):
        assert len(solution.times) == 5
        assert solution.values.shape == (5, len(solution.grid))
        assert solution.grid[-1] == 0.5

    def test_value_at_stored_level(self, solution):
        x = solution.grid[::7]

        np.testing.assert_allclose(solution.value(solution.times[2], x), solution.values[2][::7])

    def test_value_between_levels(self, solution):
        t = 0.5 * (solution.times[1] + solution.times[2])
        x = solution.grid[10]
        expected = 0.5 * (solution.values[1][10] + solution.values[2][10])

        assert float(solution.value(t, x)) == pytest.approx(expected)

    def test_series(self, solution):
        series = solution.series()

        assert [s.t for s in series] == list(solution.times)
        np.testing.assert_array_equal(series[-1].v, solution.final.v)


class TestReconstruction:
    def test_zero_at_initial_time(self, fd_flow):
        u = reconstruct_u_exact(fd_flow, [0.0, 0.01], np.linspace(0.1, 0.2, 5))

        np.testing.assert_array_equal(u[0], 0.0)
        assert np.all(u[1] >= 0)

    def test_fd_matches_exact(self, fd_flow):
        eps = fd_flow.params.epsilon
        cfg = FDConfig(h=eps / 16, t_final=0.3 * fd_flow.t_eps, snapshots=10**6)
        solution = solve_factored(_profile_ic(fd_flow), cfg, t_eps=fd_flow.t_eps)
        t_grid = np.linspace(0.0, 0.25 * fd_flow.t_eps, 4)
        x_grid = np.linspace(0.1, 0.2, 6)

        exact = reconstruct_u_exact(fd_flow, t_grid, x_grid)
        approx = reconstruct_u_fd(solution, t_grid, x_grid)

        error = characteristic_error(solution, fd_flow)
        assert np.abs(approx - exact).max() <= 4 * error * t_grid[-1] + 1e-12


class TestResidual:
    def _quadratic(self, m=9):
        t = np.linspace(0.0, 0.4, m)
        x = np.linspace(0.1, 0.5, m)
        tt, xx = np.meshgrid(t, x, indexing="ij")
        return tt, xx, xx**2 + tt**2, float(t[1] - t[0])

    def test_exact_on_quadratic(self):
        tt, xx, u, h = self._quadratic()

        residual = residual_field(u, h, h)

        np.testing.assert_allclose(
            residual, -8 * (xx - tt)[1:-1, 1:-1], rtol=1e-9, atol=1e-9
        )

    def test_vanishes_on_affine(self):
        tt, xx, _, h = self._quadratic()

        assert residual_check(3 * xx - 2 * tt + 1, h, h) < 1e-9

    def test_needs_three_by_three(self):
        with pytest.raises(PreconditionError):
            residual_field(np.zeros((2, 5)), 0.1, 0.1)

    def test_scaled_residual_at_rounding_level(self):
        _, _, u, h = self._quadratic()

        assert scaled_residual_check(u, h, h, lam=0.5, omega=-1.0, gamma=1.0) <= 1e-9

    def test_scaled_residual_detects_wrong_pair(self):
        _, _, u, h = self._quadratic()

        assert scaled_residual_check(u, h, h, lam=0.5, omega=1.0, gamma=1.0) > 1e-3

    def test_residual_shrinks_on_exact_solution(self, fd_flow):
        eps = fd_flow.params.epsilon
        half = 0.02
        t_c = fd_flow.t_eps / 4
        x_c = t_c + eps + 3 * half
        norms = []
        for m in (8, 16):
            t_grid = np.linspace(t_c - half, t_c + half, m + 1)
            x_grid = np.linspace(x_c - half, x_c + half, m + 1)
            dt = float(t_grid[1] - t_grid[0])
            norms.append(residual_check(reconstruct_u_exact(fd_flow, t_grid, x_grid), dt, dt))

        assert norms[1] < norms[0]
