"""
Blow-up of the localized directional norm as t approaches t_eps.

All pairings are evaluated in Lagrangian coordinates: with x = phi(t, y) the
x1-pairing of f_xx against |x - x'|^p becomes the pairing of
G = f_xx(phi) phi_y against |phi(y) - phi(y')|^p, and the kernel factors
as |y - y'|^p D(y, y')^p with D the divided difference of phi.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from analysis.charflow import CharFlow, compute_blowup, refined_grid
from analysis.profiles import chi_eps, chi_eps_jet, cutoff_psi, smooth_transition
from analysis.quadrature import pairing_matrix
from analysis.sobolev import (
    SampledField2D,
    fourier_norm,
    kernel_exponent,
    kernel_prefactor,
)
from common.config import BlowupConfig, GridsConfig
from common.errors import PreconditionError, QuadratureError
from common.metrics import QUADRATURE_NODES
from common.models import BlowupReport, BlowupSample, Directional, NormSpec
from experiments.reporting import check, power_fit, record_checks, stage

logger = logging.getLogger(__name__)

SIGN_TOL = 1e-12
CROSS_N1 = 1024
CROSS_N2 = 32


@dataclass(frozen=True)
class Localization:
    """Cutoffs around the moving focus x_c(t) = phi(t, nu_eps)."""

    flow: CharFlow
    eta: float
    delta: float

    @property
    def nu(self) -> float:
        return self.flow.nu_eps

    def center(self, t: float) -> float:
        return float(self.flow.phi(t, self.nu))

    def zetas(self, t: float) -> tuple[float, float, float, float]:
        """Labels whose images sit at x_c - 2 delta, x_c - delta, x_c + delta, x_c + 2 delta."""
        nu, eta, d = self.nu, self.eta, self.delta
        left = self.flow.invert_offset(t, np.array([-2 * d, -d]), nu, nu - eta, nu)
        right = self.flow.invert_offset(t, np.array([d, 2 * d]), nu, nu, nu + eta)
        return float(left[0]), float(left[1]), float(right[0]), float(right[1])

    def psi1_jet(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """q((2 delta - |xi|)/delta) and its xi-derivatives."""
        d = self.delta
        q, q1, q2 = smooth_transition((2 * d - np.abs(xi)) / d)
        return q, -np.sign(xi) * q1 / d, q2 / d**2

    def psi2(self, x2) -> np.ndarray:
        return cutoff_psi(np.asarray(x2, dtype=float) / (2 * self.delta))

    def x2_mass(self) -> float:
        value, _ = integrate.quad(lambda x2: float(self.psi2(x2)) ** 2, -self.delta, self.delta)
        return value


def localize(flow: CharFlow, t_max: float) -> Localization:
    """
    Largest delta keeping [zeta^1, zeta^4] inside [nu - eta, nu + eta] up to t_max.

    Raises:
        PreconditionError: If the flow does not focus or nu_eps >= eps
    """
    if not flow.focuses:
        raise PreconditionError("blow-up needs a focusing characteristic flow")
    nu = flow.nu_eps
    eta = (flow.params.epsilon - nu) / 2
    if eta <= 0:
        raise PreconditionError(f"nu_eps={nu!r} must lie below eps={flow.params.epsilon!r}")
    sides = [abs(float(flow.phi_offset(t_max, nu + s * eta, nu))) for s in (-1.0, 1.0)]
    return Localization(flow=flow, eta=eta, delta=min(sides) / 2)


def focus_nodes(
    loc: Localization, t: float, cfg: BlowupConfig, grids: GridsConfig, refine: int = 1
) -> np.ndarray:
    """Nodes on [zeta^1, zeta^4] refined toward nu down to a fraction of the focusing width."""
    flow, nu, eta = loc.flow, loc.nu, loc.eta
    z1, _, _, z4 = loc.zetas(t)
    step = eta / 4
    py = flow.phi_y(t, np.array([nu - step, nu, nu + step]))
    a2 = max((0.5 * (py[0] + py[2]) - py[1]) / step**2, 1e-300)
    width = math.sqrt(max(py[1], 0.0) / a2)
    h_max = (z4 - z1) / (cfg.uniform_nodes * refine)
    h_min = min(width / 24, (z4 - z1) / cfg.uniform_nodes) / refine
    return refined_grid(z1, z4, nu, h_max, grids.focus_ratio, h_min)


@dataclass(frozen=True)
class _Pairing:
    y: np.ndarray
    kernel: np.ndarray
    g_full: np.ndarray
    g_v: np.ndarray
    g1: np.ndarray
    g4: np.ndarray

    def form(self, a: np.ndarray, b: np.ndarray, rows=None, cols=None) -> float:
        k = self.kernel
        if rows is not None:
            k = np.where(rows[:, None], k, 0.0)
        if cols is not None:
            k = np.where(cols[None, :], k, 0.0)
        return float(a @ k @ b)


def _pairing(loc: Localization, t: float, y: np.ndarray, lam: float) -> _Pairing:
    flow, nu = loc.flow, loc.nu
    c, c1, c2 = chi_eps_jet(y, flow.params)
    jet = flow.derivatives(t, y)
    phi_y, phi_yy = jet.phi_y, jet.phi_yy
    offset = np.asarray(flow.phi_offset(t, y, nu))
    v_x = c1 / phi_y
    v_xx = (c2 * phi_y - c1 * phi_yy) / phi_y**3
    q0, q1, q2 = loc.psi1_jet(offset)

    p = kernel_exponent(lam)
    dy = y[:, None] - y[None, :]
    dx = offset[:, None] - offset[None, :]
    divided = np.divide(dx, dy, out=np.ones_like(dx), where=dy != 0)
    np.fill_diagonal(divided, phi_y)
    kernel = pairing_matrix(y, p) * divided**p

    return _Pairing(
        y=y,
        kernel=kernel,
        g_full=(q2 * c + 2 * q1 * v_x + q0 * v_xx) * phi_y,
        g_v=q0 * v_xx * phi_y,
        g1=c2 / phi_y,
        g4=-c1 * phi_yy / phi_y**2,
    )


def _regions(y: np.ndarray, zetas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    _, z2, z3, _ = zetas
    return y < z2, (y >= z2) & (y <= z3), y > z3


def _core_split(pair: _Pairing, nu: float, kappa: float) -> tuple[dict, dict, bool]:
    core = np.abs(pair.y - nu) <= kappa
    left = core & (pair.y <= nu)
    right = core & (pair.y > nu)
    g1 = np.where(core, pair.g1, 0.0)
    g4 = np.where(core, pair.g4, 0.0)
    terms = {
        "i": pair.form(g1, g1),
        "ii+iii": 2 * pair.form(g1, g4),
        "iv": pair.form(g4, g4),
    }
    quadrants = {
        "alpha": pair.form(g4, g4, left, left),
        "beta": pair.form(g4, g4, left, right),
        "gamma": pair.form(g4, g4, right, left),
        "delta": pair.form(g4, g4, right, right),
    }
    # pointwise integrand sign: the kernel |phi(y) - phi(y')|^p is positive
    values = np.outer(pair.g4[core], pair.g4[core])
    tol = SIGN_TOL * float(np.abs(values).max(initial=0.0))
    lc, rc = left[core], right[core]
    signs_ok = bool(
        np.all(values[np.ix_(lc, lc)] >= -tol)
        and np.all(values[np.ix_(rc, rc)] >= -tol)
        and np.all(values[np.ix_(lc, rc)] <= tol)
        and np.all(values[np.ix_(rc, lc)] <= tol)
    )
    return terms, quadrants, signs_ok


def _core_pairing(loc: Localization, t: float, y: np.ndarray, lam: float) -> tuple[_Pairing, float]:
    pair = _pairing(loc, t, y, lam)
    core = _regions(y, loc.zetas(t))[1]
    return pair, pair.form(pair.g_v, pair.g_v, rows=core)


def blowup_sample(
    loc: Localization,
    tau: float,
    cfg: BlowupConfig,
    grids: GridsConfig,
    x2_mass: float,
) -> BlowupSample:
    """
    Localized norm and its I^1/I^2/I^3 split at t = t_eps - tau.

    Raises:
        QuadratureError: If I^2 moves by more than the convergence tolerance
            between the grid and its every-other-node subgrid, after one doubling
    """
    flow, nu = loc.flow, loc.nu
    lam = flow.params.lambda_
    t = flow.t_eps - tau
    zetas = loc.zetas(t)

    for refine in (1, 2):
        y = focus_nodes(loc, t, cfg, grids, refine)
        pair, i2 = _core_pairing(loc, t, y, lam)
        _, i2_coarse = _core_pairing(loc, t, y[::2], lam)
        if abs(i2 - i2_coarse) <= cfg.convergence_tol * abs(i2):
            break
        logger.debug(f"I2 at t={t!r} not converged on {len(y)} nodes, refining")
    else:
        raise QuadratureError(t, len(y), f"I2={i2:.6g} vs subgrid {i2_coarse:.6g}")

    QUADRATURE_NODES.labels(operation="blowup_pairing").observe(len(y))
    first, core, third = _regions(y, zetas)
    i1 = pair.form(pair.g_v, pair.g_v, rows=first)
    i3 = pair.form(pair.g_v, pair.g_v, rows=third)
    full = pair.form(pair.g_full, pair.g_full)
    kappa = 0.5 * min(nu - zetas[1], zetas[2] - nu)
    terms, quadrants, signs_ok = _core_split(pair, nu, kappa)
    norm_sq = kernel_prefactor(lam) * x2_mass * full
    outer = abs(i1) + abs(i3)
    logger.info(f"tau={tau:.3e}: I2={i2:.6e}, nodes={len(y)}")
    return BlowupSample(
        t=t,
        tau=tau,
        nodes=len(y),
        zeta=zetas,
        kappa=kappa,
        i1=i1,
        i2=i2,
        i3=i3,
        remainder=full - (i1 + i2 + i3),
        norm_sq=norm_sq,
        ratio=i2 / outer if outer > 0 else math.inf,
        core_terms=terms,
        quadrants=quadrants,
        signs_ok=signs_ok,
    )


def fourier_cross_check(loc: Localization, t: float, x2_mass: float) -> float:
    """Squared directional Fourier norm of v psi^1 psi^2 sampled on a uniform grid."""
    flow, nu, eta, d = loc.flow, loc.nu, loc.eta, loc.delta
    lam = flow.params.lambda_

    def field(xi, x2):
        line = np.clip(xi[:, 0], -2 * d, 2 * d)
        labels = flow.invert_offset(t, line, nu, nu - eta, nu + eta)
        profile = chi_eps(labels, flow.params) * loc.psi1_jet(xi[:, 0])[0]
        return profile[:, None] * loc.psi2(x2[0])[None, :]

    sampled = SampledField2D.from_function(
        field, (-2.2 * d, 2.2 * d), (-1.1 * d, 1.1 * d), CROSS_N1, CROSS_N2
    )
    spec = NormSpec(s=1.75 - lam, directional=Directional.X1)
    return fourier_norm(sampled, spec) ** 2


def run_blowup(
    cfg: BlowupConfig,
    grids: GridsConfig | None = None,
    threads: int = 1,
    flow: CharFlow | None = None,
) -> BlowupReport:
    """
    Sample the localized norm at t_eps - tau_k, tau_k = tau_scale t_eps 2^-k.

    Args:
        cfg: Blow-up section, including its own parameter set
        grids: Grid section (scan size, refinement ratio)
        threads: Workers over time samples
        flow: Precomputed characteristic flow for cfg.params

    Returns:
        Report with per-time samples, power fits and checks
    """
    grids = grids or GridsConfig()
    p = cfg.params
    flow = flow or compute_blowup(p, grids.scan_points)
    taus = [cfg.tau_scale * flow.t_eps * 2.0**-k for k in range(cfg.k_max + 1)]
    loc = localize(flow, flow.t_eps - taus[-1])
    mass = loc.x2_mass()
    logger.info(
        f"Blow-up run: t_eps={flow.t_eps:.10g}, nu={flow.nu_eps:.10g}, "
        f"eta={loc.eta:.4g}, delta={loc.delta:.4g}"
    )

    with stage("blowup", "samples"):
        with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
            samples = list(pool.map(lambda tau: blowup_sample(loc, tau, cfg, grids, mass), taus))

    with stage("blowup", "cross_check"):
        fourier_sq = fourier_cross_check(loc, samples[0].t, mass)
    cross = abs(fourier_sq - samples[0].norm_sq) / samples[0].norm_sq

    tau_arr = [s.tau for s in samples]
    i2_fit = power_fit(tau_arr, [s.i2 for s in samples], cfg.fit_points)
    i1_fit = power_fit(tau_arr, [s.i1 for s in samples], cfg.fit_points)
    lower = 2.75 - 3 * p.lambda_
    last = samples[-4:]
    i2_last = [s.i2 for s in last]
    ratios = [s.ratio for s in last]
    first = samples[0]
    checks = [
        check(
            "integrals finite at 0.9 t_eps",
            all(math.isfinite(v) for v in (first.i1, first.i2, first.i3)),
        ),
        check("I2 positive near t_eps", all(v > 0 for v in i2_last)),
        check("I2 increasing", all(b > a for a, b in zip(i2_last, i2_last[1:]))),
        check("I2 dominance increasing", all(b > a for a, b in zip(ratios, ratios[1:]))),
        check("I2 dominance at final sample", ratios[-1] > cfg.ratio_min, ratios[-1], cfg.ratio_min),
        check(
            "I2 exponent above 1",
            i2_fit.exponent >= 1 + cfg.base_margin,
            i2_fit.exponent,
            1 + cfg.base_margin,
        ),
        check(
            "I2 exponent against lower bound",
            i2_fit.exponent >= lower - cfg.exponent_margin,
            i2_fit.exponent,
            lower - cfg.exponent_margin,
        ),
        check(
            "|I1| exponent",
            i1_fit.exponent <= cfg.i1_exponent_cap,
            i1_fit.exponent,
            cfg.i1_exponent_cap,
        ),
        check("I2 fit R^2", i2_fit.r_squared >= 0.98, i2_fit.r_squared, 0.98, required=False),
        check("quadrant signs", all(s.signs_ok for s in samples)),
        check("kernel vs Fourier", cross <= cfg.cross_check_tol, cross, cfg.cross_check_tol),
    ]
    record_checks("blowup", checks)
    return BlowupReport(
        experiment="blowup",
        params=p,
        t_eps=flow.t_eps,
        nu_eps=flow.nu_eps,
        M_eps=flow.M_eps,
        eta=loc.eta,
        delta_loc=loc.delta,
        x2_mass=mass,
        samples=samples,
        i2_fit=i2_fit,
        i1_fit=i1_fit,
        lower_bound_exponent=lower,
        cross_check_rel_diff=cross,
        checks=checks,
    )
