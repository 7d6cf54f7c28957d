"""Scaling of the log-Sobolev norm and the glued sequence of rescaled data."""

import logging
import math

import numpy as np
from scipy import integrate, special

from analysis.sobolev import SampledField2D, fourier_norm
from common.config import GlueConfig, ScalingConfig
from common.errors import ConstructionError, PreconditionError
from common.models import GlueReport, GlueTerm, NormSpec, ProfileParams, ScalingReport, ScalingRow
from experiments.fields import gaussian_field
from experiments.reporting import check, record_checks

logger = logging.getLogger(__name__)

MAX_GLUE_TERMS = 8


def scale_norm_check(
    f: SampledField2D,
    omega: float,
    gamma: float,
    lam_list,
    beta: float,
    s: float = 2.75,
) -> ScalingReport:
    """
    Compare ||lam^omega f(lam^gamma .)|| with lam^omega lam^(7 gamma/4) (1 + 2|ln lam^gamma|)^beta ||f||.

    The norm is the homogeneous one of order s with log weight beta.

    Raises:
        PreconditionError: If omega + gamma != 0 or some lam is outside (0, 1]
    """
    if abs(omega + gamma) > 1e-12:
        raise PreconditionError(f"scaling needs omega + gamma = 0, got {omega} + {gamma}")
    lams = [float(lam) for lam in lam_list]
    if any(not 0 < lam <= 1 for lam in lams):
        raise PreconditionError(f"scaling factors must lie in (0, 1], got {lams}")

    spec = NormSpec(s=s, beta=beta)
    base = fourier_norm(f, spec)
    rows = []
    for lam in lams:
        norm = fourier_norm(f.rescaled(lam, omega, gamma), spec)
        predicted = (
            lam**omega * lam ** (1.75 * gamma) * (1 + 2 * abs(gamma * math.log(lam))) ** beta * base
        )
        rows.append(ScalingRow(lam=lam, norm=norm, predicted=predicted, ratio=norm / predicted))

    exact = omega + gamma * (s - 1)
    scaled = [r for r in rows if r.lam < 1]
    measured = None
    if len(scaled) >= 2:
        first, last = scaled[0], scaled[-1]
        measured = math.log(last.norm / first.norm) / math.log(last.lam / first.lam)
    return ScalingReport(
        experiment="scaling",
        omega=omega,
        gamma=gamma,
        beta=beta,
        s=s,
        base_norm=base,
        rows=rows,
        exact_exponent=exact,
        measured_exponent=measured,
    )


def run_scaling(params: ProfileParams, cfg: ScalingConfig) -> ScalingReport:
    f = gaussian_field(cfg.n, padding=cfg.padding)
    lams = [1.0] + [n**-4.0 for n in cfg.n_values]
    report = scale_norm_check(f, cfg.omega, cfg.gamma, lams, params.beta, cfg.s)
    plain = scale_norm_check(f, cfg.omega, cfg.gamma, lams, 0.0, cfg.s)

    ratios = [r.ratio for r in report.rows]
    identity = [r.ratio for r in report.rows if r.lam == 1.0]
    exact_gap = max(
        abs(r.norm / (r.lam**cfg.omega * r.lam ** (cfg.gamma * (cfg.s - 1)) * plain.base_norm) - 1)
        for r in plain.rows
    )
    exponent_gap = abs(plain.measured_exponent - plain.exact_exponent)
    checks = [
        check("lambda = 1 ratio is exactly 1", identity == [1.0]),
        check("ratios below cap", max(ratios) <= cfg.ratio_cap, max(ratios), cfg.ratio_cap),
        check("beta = 0 scaling exact", exact_gap <= cfg.exact_tol, exact_gap, cfg.exact_tol),
        check("beta = 0 exponent to 3 decimals", exponent_gap < 5e-4, exponent_gap, 5e-4),
    ]
    record_checks("scaling", checks)
    logger.info(
        f"Scaling: max ratio {max(ratios):.4f}, exponent {plain.measured_exponent:.6f} "
        f"vs {plain.exact_exponent:.6f}"
    )
    return report.model_copy(
        update={"checks": checks, "measured_exponent": plain.measured_exponent}
    )


# Gluing


def _chi_at(log_eps_abs: float, alpha: float) -> float:
    """chi(eps) from |ln eps| without forming eps."""
    return -special.gamma(alpha + 1) * special.gammaincc(alpha + 1, log_eps_abs)


def glue_norm_bound(n: float, beta: float) -> float:
    return 2 * n**-3 * (1 + 8 * math.log(n)) ** beta


def build_glued_sequence(params: ProfileParams, cfg: GlueConfig) -> GlueReport:
    """
    Lay out the rescaled terms u_n, lam_n = n^-4, omega = -1, gamma = 1.

    ln eps_n = -max(n^5, n^(6/alpha)) is kept in log form throughout. The
    unscaled supports are placed consecutively with a gap of cfg.gap.

    Raises:
        PreconditionError: If n_max > 8 or n_min < 2
        ConstructionError: If two translated supports overlap
    """
    if cfg.n_max > MAX_GLUE_TERMS or cfg.n_min < 2 or cfg.n_min > cfg.n_max:
        raise PreconditionError(
            f"glue needs 2 <= n_min <= n_max <= {MAX_GLUE_TERMS}, got {cfg.n_min}..{cfg.n_max}"
        )
    alpha, beta, w = params.alpha, params.beta, params.width_factor
    terms: list[GlueTerm] = []
    cursor = 0.0
    total = 0.0
    for n in range(cfg.n_min, cfg.n_max + 1):
        big_l = max(float(n) ** 5, float(n) ** (6 / alpha))
        stretch = float(n) ** 4
        t_n = stretch * (1 - _chi_at(big_l, alpha)) ** 2 / (2 * big_l**alpha)
        lo = math.exp(-big_l) / 2
        hi = 2 * big_l ** (-alpha / 2)
        start = cursor if not terms else cursor + cfg.gap
        translated = (start, start + (hi - lo))
        cursor = translated[1]
        total += glue_norm_bound(n, beta)
        terms.append(
            GlueTerm(
                n=n,
                lam=n**-4.0,
                log_eps=-big_l,
                t_n=t_n,
                t_bound=stretch / big_l**alpha,
                support=(lo, hi),
                scaled_support=(stretch * lo, stretch * hi),
                translated_support=translated,
                width_bound=2 * w * math.sqrt(hi) / abs(math.log(hi)) ** params.delta,
                norm_bound=glue_norm_bound(n, beta),
                partial_sum=total,
            )
        )

    for left, right in zip(terms, terms[1:]):
        if right.translated_support[0] < left.translated_support[1] or cfg.gap <= 0:
            raise ConstructionError(
                f"supports of terms n={left.n} and n={right.n} overlap: "
                f"{left.translated_support} vs {right.translated_support}"
            )

    tail, _ = integrate.quad(lambda x: glue_norm_bound(x, beta), cfg.n_max, np.inf)
    extent = terms[-1].translated_support[1] - terms[0].translated_support[0]
    sum_bound = sum(2 / t.n**3 for t in terms) + cfg.gap * (len(terms) - 1)
    bounds = [t.norm_bound for t in terms]
    widths = [t.width_bound for t in terms]
    checks = [
        check("t_n <= n^4/|ln eps_n|^alpha", all(t.t_n <= t.t_bound for t in terms)),
        check(
            "t_n <= 1/n",
            all(t.t_bound <= 1 / t.n for t in terms),
            max(t.t_bound * t.n for t in terms),
            1.0,
        ),
        check("partial sums increasing", all(b > 0 for b in bounds)),
        check("norm-bound ratio test", all(b < a for a, b in zip(bounds, bounds[1:]))),
        check(
            "tail of norm bounds small",
            tail <= cfg.tail_fraction * total,
            tail / total,
            cfg.tail_fraction,
            required=False,
        ),
        check(
            "cumulative extent bounded", extent <= sum_bound * (1 + 1e-9), extent, sum_bound
        ),
        check("width bound decreasing", all(b < a for a, b in zip(widths, widths[1:])), required=False),
    ]
    record_checks("glue", checks)
    logger.info(f"Glued {len(terms)} terms: partial sum {total:.6g}, tail bound {tail:.3g}")
    return GlueReport(
        experiment="glue",
        terms=terms,
        cumulative_extent=extent,
        support_sum_bound=sum_bound,
        tail_bound=float(tail),
        checks=checks,
    )
