"""Fits, check bookkeeping and report writers shared by the experiments."""

import logging
import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from common.metrics import CHECK_RESULTS, STAGE_LATENCY
from common.models import CheckResult, PowerFit

logger = logging.getLogger(__name__)


def linear_fit(x, y) -> tuple[float, float, float]:
    """Ordinary least squares y = slope x + intercept; returns (slope, intercept, R^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if total == 0 else 1 - float(np.sum(residual**2)) / total
    return float(slope), float(intercept), r_squared


def power_fit(x, y, points: int = 6) -> PowerFit:
    """
    Fit |y| ~ C x^(-e) on the last points samples.

    The uncertainty is half the spread between the fits on the last 4 and the
    last `points` samples.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    slope, _, r_squared = linear_fit(lx[-points:], ly[-points:])
    short, _, _ = linear_fit(lx[-4:], ly[-4:])
    return PowerFit(exponent=-slope, uncertainty=abs(slope - short) / 2, r_squared=r_squared)


def check(
    name: str,
    passed: bool,
    value: float | None = None,
    threshold: float | None = None,
    required: bool = True,
    detail: str = "",
) -> CheckResult:
    return CheckResult(
        name=name,
        passed=bool(passed),
        required=required,
        value=None if value is None else float(value),
        threshold=None if threshold is None else float(threshold),
        detail=detail,
    )


def record_checks(experiment: str, checks: Sequence[CheckResult]) -> None:
    """Count check outcomes and log the failures."""
    for c in checks:
        outcome = "pass" if c.passed else "fail"
        CHECK_RESULTS.labels(experiment=experiment, check=c.name, outcome=outcome).inc()
        if not c.passed:
            level = logging.ERROR if c.required else logging.WARNING
            logger.log(level, f"[{experiment}] check failed: {c.name} value={c.value} threshold={c.threshold}")


@contextmanager
def stage(experiment: str, name: str) -> Iterator[None]:
    start_time = time.perf_counter()
    try:
        yield
    finally:
        STAGE_LATENCY.labels(experiment=experiment, stage=name).observe(
            time.perf_counter() - start_time
        )


def write_json(model: BaseModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2, by_alias=True) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], columns: Sequence) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(
        path,
        np.column_stack([np.asarray(c, dtype=float) for c in columns]),
        delimiter=",",
        header=",".join(header),
        comments="",
    )
    return path
