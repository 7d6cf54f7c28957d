import logging
from concurrent.futures import ThreadPoolExecutor

from analysis.charflow import compute_blowup
from common.config import LifespanConfig
from common.errors import PreconditionError
from common.models import LifespanReport, LifespanRow, ProfileParams
from experiments.reporting import check, record_checks

logger = logging.getLogger(__name__)


def lifespan_row(params: ProfileParams, scan_points: int = 100_000) -> LifespanRow:
    flow = compute_blowup(params, scan_points)
    bound = 1 / params.log_eps**params.alpha
    return LifespanRow(
        epsilon=params.epsilon,
        t_eps=flow.t_eps,
        nu_eps=flow.nu_eps,
        M_eps=flow.M_eps,
        bound=bound,
        product=flow.t_eps / bound,
    )


def lifespan_sweep(
    params: ProfileParams,
    cfg: LifespanConfig,
    threads: int = 1,
    scan_points: int = 100_000,
) -> LifespanReport:
    """
    Tabulate t_eps against 1/|ln eps|^alpha along a decreasing eps list.

    Raises:
        PreconditionError: If the eps list is not strictly decreasing
    """
    eps_list = list(cfg.eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise PreconditionError(f"eps_list must be strictly decreasing, got {eps_list}")

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        rows = list(
            pool.map(lambda eps: lifespan_row(params.with_epsilon(eps), scan_points), eps_list)
        )
    for row in rows:
        logger.info(
            f"eps={row.epsilon:g}: t_eps={row.t_eps:.6g}, t_eps |ln eps|^alpha={row.product:.4f}"
        )

    times = [r.t_eps for r in rows]
    products = [r.product for r in rows]
    checks = [
        check("t_eps strictly decreasing", all(b < a for a, b in zip(times, times[1:]))),
        check(
            "t_eps |ln eps|^alpha in (0, cap]",
            all(0 < p <= cfg.product_cap for p in products),
            value=max(products),
            threshold=cfg.product_cap,
        ),
    ]
    record_checks("lifespan", checks)
    return LifespanReport(experiment="lifespan", alpha=params.alpha, rows=rows, checks=checks)
