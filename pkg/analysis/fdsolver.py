"""
Finite-difference solver for the reduced 1+1 problem.

v = Du obeys the conservation law v_t + F(v)_x = 0 with
F(v) = -v - 2 ln(1 - v), so F'(v) = (1 + v)/(1 - v) > 0 and every
characteristic moves rightward. The solver is validated only against the
exact characteristic solution.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from analysis.charflow import CharFlow, FieldSample
from analysis.profiles import chi_eps
from analysis.quadrature import gauss_legendre
from common.errors import CFLViolationError, PreconditionError
from common.models import FDConfig, Limiter

logger = logging.getLogger(__name__)

DOMAIN_RIGHT = 0.5
BLOWUP_GUARD = 0.9
GL_NODES = 32


def flux(v: np.ndarray) -> np.ndarray:
    return -v - 2 * np.log1p(-v)


def flux_speed(v: np.ndarray) -> np.ndarray:
    return (1 + v) / (1 - v)


def _minmod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _rhs(v: np.ndarray, h: float, limiter: Limiter) -> np.ndarray:
    """Semi-discrete -dF/dx with upwind interface states; node 0 is held."""
    if limiter is Limiter.MINMOD:
        jumps = np.diff(v)
        slope = np.zeros_like(v)
        slope[1:-1] = _minmod(jumps[:-1], jumps[1:])
        left_state = v + 0.5 * slope
    else:
        left_state = v
    # f[i] is the flux through x_{i+1/2}
    f = flux(left_state)
    out = np.zeros_like(v)
    out[1:] = -(f[1:] - f[:-1]) / h
    return out


@dataclass(frozen=True)
class FDSolution:
    grid: np.ndarray
    times: np.ndarray
    values: np.ndarray
    steps: int
    dt: float

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def at(self, k: int) -> FieldSample:
        v = self.values[k]
        v_x = np.gradient(v, self.h)
        return FieldSample(
            t=float(self.times[k]),
            grid=self.grid,
            v=v,
            v_x=v_x,
            v_xx=np.gradient(v_x, self.h),
        )

    @property
    def final(self) -> FieldSample:
        return self.at(len(self.times) - 1)

    def series(self) -> list[FieldSample]:
        return [self.at(k) for k in range(len(self.times))]

    def value(self, t: float, x) -> np.ndarray:
        """Piecewise-linear interpolation in time and space between stored levels."""
        k = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        if len(self.times) == 1:
            return np.interp(x, self.grid, self.values[0])
        t0, t1 = self.times[k], self.times[k + 1]
        w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
        lo = np.interp(x, self.grid, self.values[k])
        hi = np.interp(x, self.grid, self.values[k + 1])
        return (1 - w) * lo + w * hi


def solve_factored(
    ic: Callable[[np.ndarray], np.ndarray],
    cfg: FDConfig,
    t_eps: float | None = None,
    speed_bound: float | None = None,
) -> FDSolution:
    """
    Evolve v from v(0, .) = ic on [0, 1/2] up to cfg.t_final.

    The inflow node x = 0 keeps its initial value and the last node is an
    outflow node. limiter=none is first-order conservative upwind with
    forward Euler; limiter=minmod is MUSCL reconstruction with SSP-RK2.

    Args:
        ic: Initial field, e.g. the chi_eps profile
        cfg: Step, CFL ratio, final time, limiter and stored levels
        t_eps: Focusing time; t_final must stay below 0.9 t_eps
        speed_bound: Speed used to size the time step, default max F'(ic)

    Returns:
        Stored time levels of v

    Raises:
        PreconditionError: If the final time is too close to t_eps or |ic| >= 1
        CFLViolationError: If the transport speed outruns the step
    """
    if t_eps is not None and cfg.t_final >= BLOWUP_GUARD * t_eps:
        raise PreconditionError(
            f"t_final={cfg.t_final!r} must be below {BLOWUP_GUARD} t_eps={BLOWUP_GUARD * t_eps!r}"
        )
    n = max(int(round(DOMAIN_RIGHT / cfg.h)), 2)
    grid = np.linspace(0.0, DOMAIN_RIGHT, n + 1)
    h = DOMAIN_RIGHT / n
    v = np.asarray(ic(grid), dtype=float).copy()
    if np.any(np.abs(v) >= 1):
        raise PreconditionError("initial field must satisfy |v| < 1")

    speed0 = speed_bound if speed_bound is not None else max(1.0, float(flux_speed(v).max()))
    dt_max = cfg.cfl * h / speed0
    steps = math.ceil(cfg.t_final / dt_max) if cfg.t_final > 0 else 0
    dt = cfg.t_final / steps if steps else 0.0
    stored = set(np.linspace(0, steps, min(cfg.snapshots, max(steps, 1)) + 1).round().astype(int))

    times, values = [0.0], [v.copy()]
    for step in range(steps):
        speed = float(flux_speed(v).max())
        ratio = speed * dt / h
        if ratio > cfg.cfl * (1 + 1e-9):
            raise CFLViolationError(step, speed, ratio)
        if cfg.limiter is Limiter.MINMOD:
            stage = v + dt * _rhs(v, h, cfg.limiter)
            v = 0.5 * v + 0.5 * (stage + dt * _rhs(stage, h, cfg.limiter))
        else:
            v = v + dt * _rhs(v, h, cfg.limiter)
        if step + 1 in stored:
            times.append((step + 1) * dt)
            values.append(v.copy())

    logger.debug(f"FD solve h={h:.3g} dt={dt:.3g} steps={steps} limiter={cfg.limiter.value}")
    return FDSolution(
        grid=grid, times=np.asarray(times), values=np.asarray(values), steps=steps, dt=dt
    )


def characteristic_error(solution: FDSolution, flow: CharFlow) -> float:
    """Sup error of the final FD level against the exact field on [t, 1/2]."""
    t = float(solution.times[-1])
    mask = solution.grid >= t
    exact = flow.sample_field(t, solution.grid[mask]).v
    return float(np.max(np.abs(solution.values[-1][mask] - exact)))


def _characteristic_value(flow: CharFlow, s: float, y: np.ndarray) -> np.ndarray:
    """v(s, y); zero left of phi(s, 0) = s where the inflow state persists."""
    out = np.zeros_like(y)
    live = y >= s
    if np.any(live):
        out[live] = chi_eps(flow.invert_phi(s, y[live]), flow.params)
    return out


def _reconstruct(value: Callable[[float, np.ndarray], np.ndarray], t_grid, x_grid, n_gl: int):
    x = np.asarray(x_grid, dtype=float)
    u = np.zeros((len(t_grid), len(x)))
    for k, t in enumerate(np.asarray(t_grid, dtype=float)):
        if t == 0:
            continue
        s_nodes, weights = gauss_legendre(0.0, t, n_gl)
        u[k] = -sum(w * value(s, x + t - s) for s, w in zip(s_nodes, weights))
    return u


def reconstruct_u_exact(flow: CharFlow, t_grid, x_grid, n_gl: int = GL_NODES) -> np.ndarray:
    """u(t, x) = -int_0^t v(s, x + t - s) ds from the characteristic field, shape (nt, nx)."""
    return _reconstruct(lambda s, y: _characteristic_value(flow, float(s), y), t_grid, x_grid, n_gl)


def reconstruct_u_fd(solution: FDSolution, t_grid, x_grid, n_gl: int = GL_NODES) -> np.ndarray:
    return _reconstruct(lambda s, y: solution.value(float(s), y), t_grid, x_grid, n_gl)


def residual_field(u: np.ndarray, dt: float, dx: float) -> np.ndarray:
    """Centered-difference Box u - (Du)(D^2 u) on interior nodes, D = d_x - d_t."""
    if u.shape[0] < 3 or u.shape[1] < 3:
        raise PreconditionError(f"residual needs at least a 3x3 stencil grid, got {u.shape}")
    c = u[1:-1, 1:-1]
    u_tt = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / dt**2
    u_xx = (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / dx**2
    u_t = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dt)
    u_x = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dx)
    u_xt = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4 * dt * dx)
    return (u_tt - u_xx) - (u_x - u_t) * (u_xx - 2 * u_xt + u_tt)


def residual_check(u: np.ndarray, dt: float, dx: float) -> float:
    """Discrete L2 norm of the residual over the interior of the stencil grid."""
    r = residual_field(np.asarray(u, dtype=float), dt, dx)
    return float(np.sqrt(np.sum(r**2) * dt * dx))


def scaled_residual_check(
    u: np.ndarray, dt: float, dx: float, lam: float, omega: float, gamma: float
) -> float:
    """
    Relative gap between the residual of u_lam = lam^omega u(lam^gamma .) and
    lam^(omega + 2 gamma) times the residual of u.

    Samples of u on steps (dt, dx) are samples of u_lam on steps
    (dt, dx) / lam^gamma. Both sides of the equation pick up the same factor
    exactly when omega + gamma = 0, so the gap is at rounding level there.
    """
    u = np.asarray(u, dtype=float)
    factor = lam ** (omega + 2 * gamma)
    scale = lam**gamma
    base = residual_field(u, dt, dx)
    scaled = residual_field(lam**omega * u, dt / scale, dx / scale)
    c = u[1:-1, 1:-1]
    box = (u[2:, 1:-1] - 2 * c + u[:-2, 1:-1]) / dt**2 - (u[1:-1, 2:] - 2 * c + u[1:-1, :-2]) / dx**2
    reference = factor * max(float(np.abs(box).max()), float(np.abs(base).max()), 1e-300)
    return float(np.abs(scaled - factor * base).max() / reference)
