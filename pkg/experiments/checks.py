"""Geometry, finite-difference and norm-engine acceptance runs."""

import logging
import math
import time

import numpy as np

from analysis.charflow import CharFlow, compute_blowup
from analysis.fdsolver import (
    characteristic_error,
    reconstruct_u_exact,
    reconstruct_u_fd,
    residual_check,
    scaled_residual_check,
    solve_factored,
)
from analysis.geometry import (
    Metric,
    appendix_sweep,
    ball_persistence_probe,
    ellipse_in_circle_check,
    speed_bound_property,
    width_asymptotic_check,
)
from analysis.profiles import chi_eps
from analysis.sobolev import (
    compact_support_upgrade,
    embedding_check,
    fourier_norm,
    kernel_norm_x1,
    l2_norm,
)
from common.config import ExperimentConfig
from common.models import (
    AppendixSummary,
    CrossMethodRow,
    Directional,
    FDConfig,
    FDLevel,
    FDReport,
    GaussianRow,
    GeometryReport,
    NormSpec,
    ProfileParams,
    SelftestReport,
)
from experiments.fields import (
    gaussian_field,
    gaussian_norm_sq,
    random_compact_fields,
    separable_fields,
)
from experiments.reporting import check, record_checks, stage

logger = logging.getLogger(__name__)

TANGENCY_TOL = 1e-6
METRIC_RANGE = 0.25
CROSS_LAMBDA = 0.01
RESIDUAL_STEPS = (8, 16, 32, 64)
RESIDUAL_HALF_WIDTH = 0.02
SCALED_RESIDUAL_TOL = 1e-9


def _field_value(p: ProfileParams):
    def v_of(_t: float, x1: float) -> float:
        value = float(chi_eps(min(max(x1, 0.0), 0.5), p))
        return min(max(value, -0.01), 0.0)

    return v_of


def _merge_appendix(summaries: list[AppendixSummary]) -> AppendixSummary:
    slack: dict[str, float] = {}
    constants: dict[str, float] = {}
    for s in summaries:
        for name, value in s.min_slack.items():
            slack[name] = min(slack.get(name, math.inf), value)
        for name, value in s.max_constant.items():
            constants[name] = max(constants.get(name, 0.0), value)
    return AppendixSummary(
        samples=sum(s.samples for s in summaries),
        failures=sum(s.failures for s in summaries),
        violations=sum(s.violations for s in summaries),
        min_slack=slack,
        max_constant=constants,
    )


def geometry_checks(
    cfg: ExperimentConfig, threads: int = 1, seed: int = 0, flow: CharFlow | None = None
) -> GeometryReport:
    """
    Ellipse sweep, metric inverse, width asymptotic, ball persistence,
    random admissible curves and the transverse-curve chain sweep.
    """
    g = cfg.geometry
    p = cfg.params
    flow = flow or compute_blowup(p, cfg.grids.scan_points)

    with stage("geometry", "ellipse"):
        ellipse = ellipse_in_circle_check(np.linspace(-0.01, 0.0, g.v_samples), g.boundary_points)
    tangency = max(
        (math.hypot(s.argmax[0] + 1, s.argmax[1]) for s in ellipse if s.v < 0), default=0.0
    )
    metrics = [Metric(float(v)) for v in np.linspace(-METRIC_RANGE, METRIC_RANGE, 11)]
    residual = max(m.product_residual() for m in metrics)
    deviation = max(m.max_component_deviation() for m in metrics)

    with stage("geometry", "width"):
        width = width_asymptotic_check(p, g.width_y_min, g.width_y_max, g.width_points, flow)
    width_gap = abs(width.constant / width.expected_limit - 1)

    with stage("geometry", "clearance"):
        clearance = ball_persistence_probe(flow, np.linspace(0.0, flow.t_eps / 2, g.clearance_points))

    with stage("geometry", "speed_bound"):
        excess = speed_bound_property(_field_value(p), g.n_curves, g.n_segments, seed, threads)

    with stage("geometry", "appendix"):
        summaries = []
        log_factor = []
        for eps in g.appendix_eps:
            pe = p.with_epsilon(eps)
            flow_e = compute_blowup(pe, cfg.grids.scan_points)
            summaries.append(appendix_sweep(flow_e, g.appendix_samples, seed))
            log_factor.append((eps, pe.log_eps ** (pe.delta - pe.alpha / 2)))
    appendix = _merge_appendix(summaries)
    factors = [f for _, f in log_factor]

    checks = [
        check("ellipse inside unit disk", all(s.passed for s in ellipse)),
        check("tangency at (-1, 0)", tangency <= TANGENCY_TOL, tangency, TANGENCY_TOL),
        check("metric inverse", residual <= 1e-12, residual, 1e-12),
        check("metric close to Minkowski", deviation <= 0.5, deviation, 0.5),
        check("width constant near 2w", width_gap <= 0.02, width_gap, 0.02),
        check(
            "width ratio drift per decade",
            width.max_change_per_decade <= 0.01,
            width.max_change_per_decade,
            0.01,
        ),
        check("clearance positive", all(c.clearance > 0 for c in clearance), min(c.clearance for c in clearance), 0.0),
        check(
            "initial clearance at least eps/4",
            clearance[0].clearance >= p.epsilon / 4,
            clearance[0].clearance,
            p.epsilon / 4,
            required=False,
        ),
        check("displacement within elapsed time", excess <= 1e-12, excess, 1e-12),
        check("chain ledger all pass", appendix.failures == 0, appendix.failures, 0),
        check(
            "chain log factor decreasing in eps",
            all(b < a for a, b in zip(factors, factors[1:])),
            required=False,
        ),
    ]
    record_checks("geometry", checks)
    logger.info(
        f"Geometry: {len(ellipse)} ellipses, speed excess {excess:.3e}, "
        f"{appendix.samples} chain samples with {appendix.failures} failures"
    )
    return GeometryReport(
        experiment="geometry",
        ellipse=ellipse,
        width=width,
        clearance=clearance,
        speed_bound_max_excess=excess,
        appendix=appendix,
        log_factor=log_factor,
        checks=checks,
    )


def _order(prev: FDLevel, level: FDLevel) -> float | None:
    if prev.error <= 0 or level.error <= 0:
        return None
    return math.log(prev.error / level.error) / math.log(prev.h / level.h)


def _with_orders(levels: list[FDLevel]) -> list[FDLevel]:
    out = levels[:1]
    for level in levels[1:]:
        out.append(level.model_copy(update={"order": _order(out[-1], level)}))
    return out


def fd_checks(cfg: ExperimentConfig, flow: CharFlow | None = None) -> FDReport:
    """
    Refinement study of the upwind solver against the characteristic field,
    maximum principle, zero data, and the residual of the reconstructed u.
    """
    fd = cfg.fdcheck
    p = cfg.params.with_epsilon(fd.epsilon)
    flow = flow or compute_blowup(p, cfg.grids.scan_points)
    t_final = fd.t_fraction * flow.t_eps

    def ic(x):
        return chi_eps(x, p)

    levels = []
    solution = None
    with stage("fdcheck", "refinement"):
        for k in fd.refinements:
            run = FDConfig(h=p.epsilon / k, cfl=fd.cfl, t_final=t_final, limiter=fd.limiter, snapshots=10**9)
            solution = solve_factored(ic, run, t_eps=flow.t_eps)
            error = characteristic_error(solution, flow)
            levels.append(FDLevel(h=solution.h, steps=solution.steps, error=error))
            logger.info(f"FD h={solution.h:.3e}: sup error {error:.3e}")
    levels = _with_orders(levels)

    lowest = float(np.min(chi_eps(solution.grid, p)))
    min_v, max_v = float(solution.values.min()), float(solution.values.max())
    zero = solve_factored(
        np.zeros_like, FDConfig(h=p.epsilon / fd.refinements[0], t_final=t_final), t_eps=flow.t_eps
    )

    t_center = flow.t_eps / 4
    # labels feeding the stencil stay above eps, where chi_eps is smooth
    x_center = t_center + p.epsilon + 3 * RESIDUAL_HALF_WIDTH
    residual_levels = []
    u = dt = None
    with stage("fdcheck", "residual"):
        for m in RESIDUAL_STEPS:
            t_grid = np.linspace(t_center - RESIDUAL_HALF_WIDTH, t_center + RESIDUAL_HALF_WIDTH, m + 1)
            x_grid = np.linspace(
                x_center - RESIDUAL_HALF_WIDTH, x_center + RESIDUAL_HALF_WIDTH, m + 1
            )
            dt = float(t_grid[1] - t_grid[0])
            u = reconstruct_u_exact(flow, t_grid, x_grid)
            residual_levels.append(FDLevel(h=dt, steps=m, error=residual_check(u, dt, dt)))
    residual_levels = _with_orders(residual_levels)
    gap = scaled_residual_check(u, dt, dt, lam=0.5, omega=-1.0, gamma=1.0)

    coarse_t = np.linspace(t_center - RESIDUAL_HALF_WIDTH, t_center + RESIDUAL_HALF_WIDTH, RESIDUAL_STEPS[0] + 1)
    coarse_x = np.linspace(
        x_center - RESIDUAL_HALF_WIDTH,
        x_center + RESIDUAL_HALF_WIDTH,
        RESIDUAL_STEPS[0] + 1,
    )
    u_gap = float(
        np.abs(reconstruct_u_fd(solution, coarse_t, coarse_x) - reconstruct_u_exact(flow, coarse_t, coarse_x)).max()
    )
    u_bound = 2 * levels[-1].error * float(coarse_t[-1])

    last = levels[-1].order or 0.0
    res_last = residual_levels[-1].order or 0.0
    checks = [
        check("sup error decreasing", all(b.error < a.error for a, b in zip(levels, levels[1:]))),
        check("observed order", last >= fd.min_order, last, fd.min_order),
        check("maximum principle", lowest - 1e-12 <= min_v and max_v <= 1e-12, min_v, lowest),
        check("zero data stays zero", bool(np.all(zero.values == 0))),
        check("residual order", res_last >= 1.0, res_last, 1.0),
        check("scaled residual", gap <= SCALED_RESIDUAL_TOL, gap, SCALED_RESIDUAL_TOL),
        check("u from FD field", u_gap <= u_bound, u_gap, u_bound, required=False),
    ]
    record_checks("fdcheck", checks)
    return FDReport(
        experiment="fdcheck",
        epsilon=p.epsilon,
        t_eps=flow.t_eps,
        t_final=t_final,
        limiter=fd.limiter,
        levels=levels,
        residual_levels=residual_levels,
        min_v=min_v,
        max_v=max_v,
        scaled_residual_gap=gap,
        checks=checks,
    )


def norms_selftest(cfg: ExperimentConfig, seed: int = 0) -> SelftestReport:
    """Gaussian closed form, Plancherel, kernel against Fourier, embeddings."""
    st, tol = cfg.selftest, cfg.tolerances
    p = cfg.params
    start_time = time.perf_counter()

    gauss = gaussian_field(st.n, st.half_width, st.padding)
    gaussian = []
    for s in st.gaussian_s:
        computed = fourier_norm(gauss, NormSpec(s=s)) ** 2
        expected = gaussian_norm_sq(s)
        gaussian.append(
            GaussianRow(s=s, computed=computed, expected=expected, rel_error=abs(computed / expected - 1))
        )
    plancherel = abs(fourier_norm(gauss, NormSpec(s=0.0)) ** 2 / l2_norm(gauss) ** 2 - 1)

    spec = NormSpec(s=1.75 - CROSS_LAMBDA, directional=Directional.X1)

    def rel_diff(f) -> tuple[float, float, float]:
        fourier = fourier_norm(f, spec)
        kernel = kernel_norm_x1(f, CROSS_LAMBDA)
        return fourier, kernel, abs(kernel - fourier) / fourier

    cross = []
    with stage("norms-selftest", "cross_method"):
        coarse = separable_fields(st.cross_n, st.padding)
        fine = separable_fields(2 * st.cross_n - 1, st.padding)
        for name, f in coarse.items():
            fourier, kernel, rel = rel_diff(f)
            rel_fine = rel_diff(fine[name])[2]
            cross.append(
                CrossMethodRow(
                    field=name,
                    fourier=fourier,
                    kernel=kernel,
                    rel_diff=rel,
                    rel_diff_fine=rel_fine,
                    reduction=rel / rel_fine if rel_fine > 0 else math.inf,
                )
            )

    with stage("norms-selftest", "embedding"):
        ratios, slacks, ordered, upgraded = [], [], True, True
        for f in random_compact_fields(st.random_fields, seed, st.n, st.half_width, st.padding):
            emb = embedding_check(f, 2.75, p.beta, p.lambda_)
            up = compact_support_upgrade(f, 2.75, p.beta)
            ratios.append(emb.log_norm / emb.plain_norm if emb.plain_norm > 0 else 0.0)
            slacks.append(up.slack)
            ordered &= emb.log_le_plain and emb.inhomogeneous_ge_homogeneous
            upgraded &= up.passed
    runtime = time.perf_counter() - start_time

    worst_gauss = max(r.rel_error for r in gaussian)
    checks = [
        check("Gaussian closed form", worst_gauss <= tol.gaussian_rel, worst_gauss, tol.gaussian_rel),
        check("Plancherel", plancherel <= tol.plancherel_rel, plancherel, tol.plancherel_rel),
        check(
            "kernel vs Fourier",
            all(r.rel_diff <= tol.cross_method for r in cross),
            max(r.rel_diff for r in cross),
            tol.cross_method,
        ),
        check(
            "halving h reduces disagreement",
            all(r.reduction >= tol.cross_reduction for r in cross),
            min(r.reduction for r in cross),
            tol.cross_reduction,
        ),
        check("log norm below plain norm", ordered, max(ratios), 1.0),
        check("compact support upgrade", upgraded and min(slacks) > 0, min(slacks), 0.0),
        check("runtime", runtime < 10.0, runtime, 10.0, required=False),
    ]
    record_checks("norms-selftest", checks)
    logger.info(f"Norm self-test: Gaussian worst {worst_gauss:.2e}, runtime {runtime:.2f}s")
    return SelftestReport(
        experiment="norms-selftest",
        gaussian=gaussian,
        plancherel_rel_error=plancherel,
        cross_method=cross,
        embedding_max_ratio=max(ratios),
        upgrade_min_slack=min(slacks),
        runtime_seconds=runtime,
        checks=checks,
    )
