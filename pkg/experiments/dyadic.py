"""Littlewood-Paley block norms of the initial data h_eps."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from analysis.profiles import dyadic_block, make_profile
from analysis.sobolev import SampledField2D, norm_report
from common.config import DyadicConfig
from common.errors import PreconditionError
from common.models import DyadicBlock, DyadicReport, NormSpec, ProfileKind, ProfileParams, UniformityRow
from experiments.reporting import check, linear_fit, record_checks, stage

logger = logging.getLogger(__name__)

J_RANGE = (2, 24)
DYADIC_ORDER = 1.75


def _block_box(p: ProfileParams, j: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """Sampling box around supp zeta(2^j x1) h_eps."""
    lam = 2.0**-j
    top = min(2 * lam, 0.5)
    half = 1.1 * 0.5 * p.width_factor * math.sqrt(top) / abs(math.log(top)) ** p.delta
    return (0.4 * lam, 2.1 * lam), (-half, half)


def sample_block(p: ProfileParams, j: int, n1: int, n2: int, padding: int = 4) -> SampledField2D:
    """Sample zeta(2^j x1) h_eps(x1, x2) on the block box."""
    block = dyadic_block(j, make_profile(ProfileKind.H_EPS, p))
    x1_range, x2_range = _block_box(p, j)
    return SampledField2D.from_function(block, x1_range, x2_range, n1, n2, padding=padding)


def block_norm(
    p: ProfileParams, j: int, cfg: DyadicConfig, padding: int = 4
) -> DyadicBlock:
    """
    Squared homogeneous H^{7/4} (ln H)^-beta norm of block j.

    The block is flagged when it reaches into the mollified region
    (2^-(j+1) < eps) or when the coarsened grid disagrees by more than the
    Richardson tolerance.
    """
    lam = 2.0**-j
    if lam / 2 >= 0.5:
        return DyadicBlock(j=j, lam=lam, norm_sq=0.0, error_estimate=0.0)
    field = sample_block(p, j, cfg.n1, cfg.n2, padding)
    report = norm_report(field, NormSpec(s=DYADIC_ORDER, beta=p.beta))
    norm_sq = report.value**2
    rel = report.error_estimate / report.value if report.value > 0 else 0.0
    reason = None
    if lam / 2 < p.epsilon:
        reason = "block reaches the mollified region"
    elif rel > cfg.richardson_tol:
        reason = f"Richardson disagreement {rel:.3g}"
    if reason:
        logger.warning(f"Dyadic block j={j} flagged: {reason}")
    return DyadicBlock(
        j=j,
        lam=lam,
        norm_sq=norm_sq,
        error_estimate=2 * report.value * report.error_estimate,
        flagged=reason is not None,
        reason=reason,
    )


def _blocks(p: ProfileParams, cfg: DyadicConfig, threads: int) -> list[DyadicBlock]:
    js = range(cfg.j_min, cfg.j_max + 1)
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        return list(pool.map(lambda j: block_norm(p, j, cfg), js))


def translation_check(p: ProfileParams, j: int, shift: float, cfg: DyadicConfig) -> float:
    """Relative change of a block norm when h_eps moves by a fraction of a grid cell in x1."""
    block = dyadic_block(j, make_profile(ProfileKind.H_EPS, p))
    (a, b), x2_range = _block_box(p, j)
    h1 = (b - a) / (cfg.n1 - 1)
    x1_range = (a, b + h1)
    offset = shift * h1
    spec = NormSpec(s=DYADIC_ORDER, beta=p.beta)
    fixed, moved = (
        norm_report(
            SampledField2D.from_function(
                lambda x1, x2, d=d: block(x1 - d, x2), x1_range, x2_range, cfg.n1 + 1, cfg.n2
            ),
            spec,
        ).value
        for d in (0.0, offset)
    )
    return abs(moved**2 - fixed**2) / fixed**2


def dyadic_uniformity(
    p: ProfileParams, cfg: DyadicConfig, threads: int = 1, block_constant: float = 0.0
) -> tuple[list[UniformityRow], float, float]:
    """
    Totals of the block sweep for each eps in cfg.uniformity_eps.

    Returns:
        (rows, relative spread, constant C_max used in the bound)
    """
    e = p.dyadic_exponent
    runs = [(eps, _blocks(p.with_epsilon(eps), cfg, threads)) for eps in cfg.uniformity_eps]
    c_max = block_constant
    for _, blocks in runs:
        for b in blocks:
            if b.norm_sq > 0:
                c_max = max(c_max, b.norm_sq / (b.j * math.log(2)) ** e)
    bound = c_max * math.log(2) ** e * float(special.zeta(-e, cfg.j_min))
    rows = [
        UniformityRow(epsilon=eps, total=sum(b.norm_sq for b in blocks), bound=bound)
        for eps, blocks in runs
    ]
    totals = np.array([r.total for r in rows])
    spread = float((totals.max() - totals.min()) / totals.mean()) if len(rows) else 0.0
    return rows, spread, c_max


def run_dyadic(
    p: ProfileParams, cfg: DyadicConfig, threads: int = 1, uniformity: bool = True
) -> DyadicReport:
    """
    Block sweep over j in [j_min, j_max] at eps = cfg.epsilon.

    Fits log(norm^2) against log|ln lam| on the unflagged blocks and checks
    the slope against 2 alpha - 2 beta - delta.

    Raises:
        PreconditionError: If the j range leaves [2, 24]
    """
    if not J_RANGE[0] <= cfg.j_min <= cfg.j_max <= J_RANGE[1]:
        raise PreconditionError(f"j range must lie in {list(J_RANGE)}, got [{cfg.j_min}, {cfg.j_max}]")
    p = p.with_epsilon(cfg.epsilon)
    e = p.dyadic_exponent
    with stage("dyadic", "blocks"):
        blocks = _blocks(p, cfg, threads)

    usable = [b for b in blocks if not b.flagged and b.norm_sq > 0]
    slope = r_squared = 0.0
    if len(usable) >= 2:
        logs = np.log([b.j * math.log(2) for b in usable])
        slope, _, r_squared = linear_fit(logs, np.log([b.norm_sq for b in usable]))
    total = sum(b.norm_sq for b in blocks)
    tail = sum(b.norm_sq for b in blocks[-cfg.tail_blocks:])
    tail_fraction = tail / total if total > 0 else 0.0
    c_ref = max((b.norm_sq / (b.j * math.log(2)) ** e for b in usable), default=0.0)

    checks = [
        check("block norms finite", all(math.isfinite(b.norm_sq) for b in blocks)),
        check("fitted slope below bound", slope <= e + cfg.slope_margin, slope, e + cfg.slope_margin),
        check("fitted slope negative", slope < 0, slope, 0.0),
        check(
            "tail below fraction of total",
            tail_fraction < cfg.tail_fraction,
            tail_fraction,
            cfg.tail_fraction,
        ),
    ]

    rows: list[UniformityRow] = []
    spread = 0.0
    if uniformity and cfg.uniformity_eps:
        with stage("dyadic", "uniformity"):
            rows, spread, c_max = dyadic_uniformity(p, cfg, threads, c_ref)
        checks.append(
            check(
                "totals below eps-independent bound",
                all(r.total <= r.bound for r in rows),
                max(r.total for r in rows),
                rows[0].bound,
            )
        )
        checks.append(
            check(
                "totals spread across eps",
                spread <= cfg.uniformity_spread,
                spread,
                cfg.uniformity_spread,
            )
        )

    translation = None
    if cfg.j_min <= cfg.translation_j <= cfg.j_max:
        with stage("dyadic", "translation"):
            translation = translation_check(p, cfg.translation_j, cfg.translation_shift, cfg)
        checks.append(check("translation invariance", translation <= 1e-3, translation, 1e-3))

    record_checks("dyadic", checks)
    logger.info(f"Dyadic sweep eps={p.epsilon:g}: slope {slope:.4f} (bound {e + cfg.slope_margin:.4f})")
    return DyadicReport(
        experiment="dyadic",
        epsilon=p.epsilon,
        exponent=e,
        blocks=blocks,
        slope=slope,
        slope_r_squared=r_squared,
        total=total,
        tail_fraction=tail_fraction,
        block_constant=c_ref,
        uniformity=rows,
        uniformity_spread=spread,
        translation_change=translation,
        checks=checks,
    )
