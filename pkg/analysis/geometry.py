"""Domain-of-dependence geometry for the metric built from v = Du."""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from analysis.charflow import CharFlow
from analysis.profiles import chi_eps
from common.errors import PreconditionError
from common.models import (
    AppendixSummary,
    ClearanceSample,
    EllipseParams,
    EllipseSample,
    InequalityRecord,
    ProfileParams,
    WidthReport,
)

logger = logging.getLogger(__name__)

MINKOWSKI = np.diag([1.0, -1.0, -1.0])
SMALL_FIELD = 1e-2
RADIUS_TOL = 1e-12
# sqrt(2) from sqrt(b - a) <= sqrt(2 t) times sqrt(9/8) from q(a) - h(b, y) <= 9a/8
CHAIN_CONSTANT = 1.5


@dataclass(frozen=True)
class Metric:
    v: float

    def upper(self) -> np.ndarray:
        """g^{ij}."""
        v = self.v
        return np.array([[1 - v, v, 0.0], [v, -1 - v, 0.0], [0.0, 0.0, -1.0]])

    def lower(self) -> np.ndarray:
        """g_{ij}."""
        v = self.v
        return np.array([[1 + v, v, 0.0], [v, -1 + v, 0.0], [0.0, 0.0, -1.0]])

    def product_residual(self) -> float:
        return float(np.abs(self.upper() @ self.lower() - np.eye(3)).max())

    def max_component_deviation(self) -> float:
        return float(np.abs(self.upper() - MINKOWSKI).max())


def causal_speed_set(v: float) -> EllipseParams:
    """
    Admissible velocities (dx1/dt, dx2/dt) for the metric at field value v.

    (1-v)^2 (x1' - v/(1-v))^2 + (1-v) x2'^2 <= 1, an ellipse whose leftmost
    point is (-1, 0) for every v.

    Raises:
        PreconditionError: If v is outside (-1, 1/2)
    """
    if not -1 < v < 0.5:
        raise PreconditionError(f"field value v={v} outside (-1, 1/2)")
    return EllipseParams(
        v=v,
        center=(v / (1 - v), 0.0),
        semi_axes=(1 / (1 - v), 1 / math.sqrt(1 - v)),
    )


def ellipse_boundary(v: float, n: int = 10_000) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boundary points at theta = 2 pi k / n; theta = pi is included for even n."""
    e = causal_speed_set(v)
    theta = 2 * np.pi * np.arange(n) / n
    x = e.center[0] + e.semi_axes[0] * np.cos(theta)
    y = e.semi_axes[1] * np.sin(theta)
    return theta, x, y


def ellipse_in_circle_check(v_samples, n: int = 10_000) -> list[EllipseSample]:
    """Largest boundary radius of E(v), overall and away from the tangency point."""
    samples = []
    for v in v_samples:
        v = float(v)
        if not -SMALL_FIELD <= v <= 0:
            raise PreconditionError(f"ellipse check assumes v in [-1/100, 0], got {v}")
        _, x, y = ellipse_boundary(v, n)
        radius = np.hypot(x, y)
        k = int(np.argmax(radius))
        # cos(theta) >= 0 is the half facing away from (-1, 0)
        far = x - causal_speed_set(v).center[0] >= 0
        off = float(radius[far].max())
        bound = 1 - abs(v) / 4
        samples.append(
            EllipseSample(
                v=v,
                max_radius=float(radius[k]),
                argmax=(float(x[k]), float(y[k])),
                off_tangency_max=off,
                off_tangency_bound=bound,
                passed=bool(radius[k] <= 1 + RADIUS_TOL and off <= bound + RADIUS_TOL),
            )
        )
    return samples


# Initial domain


def initial_half_width(x1, p: ProfileParams) -> np.ndarray:
    """w sqrt(x1) / |ln x1|^delta for x1 in (0, 1)."""
    x1 = np.asarray(x1, dtype=float)
    return p.width_factor * np.sqrt(x1) / np.power(-np.log(x1), p.delta)


def in_initial_domain(x1, x2, p: ProfileParams) -> np.ndarray:
    x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    inside = (x1 > 0) & (x1 < 1)
    safe = np.where(inside, x1, 0.5)
    return inside & (np.abs(x2) <= initial_half_width(safe, p))


@dataclass(frozen=True)
class DomainSlice:
    t: float
    x1: np.ndarray
    half_width: np.ndarray

    @classmethod
    def initial(cls, p: ProfileParams, x1_nodes, steps: int = 80) -> "DomainSlice":
        """Measure the t = 0 slice by bisection on membership of Omega_0."""
        x1 = np.asarray(x1_nodes, dtype=float)
        lo = np.zeros_like(x1)
        hi = np.ones_like(x1)
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            inside = in_initial_domain(x1, mid, p)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return cls(t=0.0, x1=x1, half_width=lo)

    def width(self, x1) -> np.ndarray:
        """a_t(x1) = length of the x2-section."""
        return 2 * np.interp(x1, self.x1, self.half_width, left=0.0, right=0.0)


def width_asymptotic_check(
    p: ProfileParams,
    y_min: float = 1e-8,
    y_max: float = 1e-2,
    n: int = 61,
    flow: CharFlow | None = None,
) -> WidthReport:
    """
    Fit a_0(phi(0, y)) |ln y|^delta / sqrt(y) over log-spaced y.

    The ratio tends to 2 w; the fitted log-log slope measures residual drift.
    """
    ys = np.geomspace(y_min, y_max, n)
    x1 = ys if flow is None else np.asarray(flow.phi(0.0, ys))
    slab = DomainSlice.initial(p, x1)
    ratios = slab.width(x1) * np.power(-np.log(ys), p.delta) / np.sqrt(ys)
    slope, intercept = np.polyfit(np.log(ys), np.log(ratios), 1)

    decades = np.log10(ys)
    small = ys <= 1e-4
    per_decade = 0.0
    if np.count_nonzero(small) > 1:
        rel = np.abs(np.diff(np.log(ratios[small]))) / np.diff(decades[small])
        per_decade = float(np.expm1(rel.max()))
    return WidthReport(
        width_factor=p.width_factor,
        constant=float(np.exp(np.mean(np.log(ratios)))),
        expected_limit=2 * p.width_factor,
        exponent=float(slope),
        max_change_per_decade=per_decade,
        ys=ys.tolist(),
        ratios=ratios.tolist(),
    )


# Transverse-curve chain along characteristics


def _chain_quantities(flow: CharFlow, a: float, y: float, t: float) -> dict[str, float]:
    p = flow.params
    v = float(chi_eps(y, p))
    b = t + float(flow.phi(t, y))
    gap = (a - y) + abs(v) * (b - y)
    displacement = math.sqrt(max(b - a, 0.0) * max(gap, 0.0))
    r_a = float(initial_half_width(a, p))
    return {"v": v, "b": b, "gap": gap, "displacement": displacement, "r_a": r_a}


def appendix_chain_check(
    flow: CharFlow, a: float, y: float, t: float, c_time: float = 0.5
) -> list[InequalityRecord]:
    """
    Evaluate the transverse-curve estimate chain with measured quantities.

    Along the characteristic of label y the field is the constant chi_eps(y),
    so in null coordinates h(s, y) = y + chi_eps(y) (s - y), b = t + phi(t, y)
    and q(a) - h(b, y) = (a - y) + |chi_eps(y)| (b - y). The lateral drift is
    bounded by sqrt((b - a)(q(a) - h(b, y))), giving r(b) = r(a) - drift.

    Args:
        flow: Characteristic flow
        a: Foot abscissa, a >= eps/4
        y: Characteristic label, y <= a
        t: Time, t <= c_time / |ln eps|^alpha

    Returns:
        Inequality ledger; entries with required=False are reported only

    Raises:
        PreconditionError: If the configuration is outside the hypotheses
    """
    p = flow.params
    eps = p.epsilon
    if a < eps / 4 or y > a or y < 0:
        raise PreconditionError(f"chain needs y <= a and a >= eps/4, got a={a}, y={y}")
    t_max = c_time / p.log_eps**p.alpha
    if not 0 < t <= t_max:
        raise PreconditionError(f"chain needs 0 < t <= {t_max:.6g}, got t={t}")

    q = _chain_quantities(flow, a, y, t)
    b, gap, drift, r_a = q["b"], q["gap"], q["displacement"], q["r_a"]
    root_ta = math.sqrt(t * a)
    measured = drift / root_ta
    ledger = []
    if abs(q["v"]) >= SMALL_FIELD:
        ledger.append(
            InequalityRecord.compare("assumption |v| < 1/100", abs(q["v"]), SMALL_FIELD)
        )
        ledger[-1] = ledger[-1].model_copy(update={"passed": False})
    ledger += [
        InequalityRecord.compare(
            "q(a)-h(b,y) <= (101/100)(a-y)", gap, 1.01 * (a - y), required=False
        ),
        InequalityRecord.compare(
            "(101/100)(a-y) <= (9/8)a", 1.01 * (a - y), 1.125 * a, required=False
        ),
        InequalityRecord.compare("q(a)-h(b,y) <= (9/8)a", gap, 1.125 * a),
        InequalityRecord.compare("b-y <= 2t+(b-y)/100", b - y, 2 * t + (b - y) / 100),
        InequalityRecord.compare(
            "sqrt(b-a) <= sqrt(2)sqrt(t)", math.sqrt(max(b - a, 0.0)), math.sqrt(2 * t)
        ),
        InequalityRecord.compare(
            "|r(b)-r(a)| <= C sqrt(t) sqrt(a)",
            drift,
            CHAIN_CONSTANT * root_ta,
            constant=measured,
        ),
        InequalityRecord.compare(
            "C sqrt(t) sqrt(a) <= r(a)|ln eps|^(delta-alpha/2)",
            measured * root_ta,
            r_a * p.log_eps ** (p.delta - p.alpha / 2),
            constant=measured,
        ),
        InequalityRecord.compare("r(b) >= r(a)/2", r_a / 2, r_a - drift),
        InequalityRecord.compare(
            "log factor |ln eps|^(delta-alpha/2) <= 1",
            p.log_eps ** (p.delta - p.alpha / 2),
            1.0,
            required=False,
        ),
    ]
    return ledger


def appendix_sweep(
    flow: CharFlow,
    n_samples: int,
    seed: int = 0,
    t_scale: float = 0.05,
    y_span: tuple[float, float] = (0.25, 4.0),
) -> AppendixSummary:
    """Sample (y, t, a) within the chain hypotheses and tally the ledger."""
    p = flow.params
    eps = p.epsilon
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t_max = t_scale / p.log_eps**p.alpha
    failures = violations = 0
    min_slack: dict[str, float] = {}
    max_constant: dict[str, float] = {}
    for _ in range(n_samples):
        y = float(np.exp(rng.uniform(math.log(y_span[0] * eps), math.log(y_span[1] * eps))))
        t = float(t_max * (1 - rng.random()))
        b = t + float(flow.phi(t, y))
        a = float(rng.uniform(y, b))
        for rec in appendix_chain_check(flow, a, y, t, c_time=t_scale):
            if rec.name.startswith("assumption"):
                violations += 1
                continue
            min_slack[rec.name] = min(min_slack.get(rec.name, math.inf), rec.slack)
            if rec.constant is not None:
                max_constant[rec.name] = max(max_constant.get(rec.name, 0.0), rec.constant)
            if rec.required and not rec.passed:
                failures += 1
    logger.info(
        f"Chain sweep eps={eps:g}: {n_samples} samples, {failures} failures, "
        f"{violations} assumption violations"
    )
    return AppendixSummary(
        samples=n_samples,
        failures=failures,
        violations=violations,
        min_slack=min_slack,
        max_constant=max_constant,
    )


def ball_persistence_probe(flow: CharFlow, t_grid) -> list[ClearanceSample]:
    """
    Lower bounds on the radius of a ball around the focus kept inside Omega_t.

    Feet with x0 <= eps/4 travel at speed <= 1, leaving clearance
    phi(t, nu) - eps/4 - t. Feet further out are controlled by the transverse
    chain: min over reachable a of r(a) - sqrt((b - a)(q(a) - h(b, nu))).

    Raises:
        PreconditionError: If alpha <= 2 delta or a time is outside [0, t_eps)
    """
    p = flow.params
    if p.alpha <= 2 * p.delta:
        raise PreconditionError(
            f"ball persistence needs alpha > 2 delta, got alpha={p.alpha}, delta={p.delta}"
        )
    eps = p.epsilon
    nu = flow.nu_eps
    out = []
    for t in np.asarray(t_grid, dtype=float):
        if not 0 <= t < flow.t_eps:
            raise PreconditionError(f"t={t} outside [0, t_eps)")
        straight = float(flow.phi(t, nu)) - eps / 4 - t
        if t == 0:
            chain = float(initial_half_width(nu, p))
        else:
            b = t + float(flow.phi(t, nu))
            feet = np.linspace(max(eps / 4, nu), b, 257)
            v = abs(float(chi_eps(nu, p)))
            gap = (feet - nu) + v * (b - nu)
            drift = np.sqrt(np.maximum(b - feet, 0) * np.maximum(gap, 0))
            chain = float(np.min(initial_half_width(feet, p) - drift))
        out.append(
            ClearanceSample(
                t=float(t), straight_line=straight, chain=chain, clearance=min(straight, chain)
            )
        )
    return out


def speed_bound_property(
    v_of: Callable[[float, float], float],
    n_curves: int = 1000,
    n_segments: int = 64,
    seed: int = 0,
    threads: int = 1,
) -> float:
    """
    Largest displacement minus elapsed time over random admissible polylines.

    Each curve draws a duration in (0, 1] and per segment a velocity uniform
    in the causal ellipse of the local field value.
    """
    children = np.random.SeedSequence(seed).spawn(n_curves)

    def excess(child: np.random.SeedSequence) -> float:
        rng = np.random.default_rng(child)
        total = 1 - rng.random()
        dt = total / n_segments
        pos = np.zeros(2)
        start = np.array([rng.uniform(0, 0.5), rng.uniform(-0.1, 0.1)])
        pos[:] = start
        for k in range(n_segments):
            e = causal_speed_set(float(v_of(k * dt, pos[0])))
            radius = math.sqrt(rng.random())
            angle = rng.uniform(0, 2 * math.pi)
            velocity = np.array(
                [
                    e.center[0] + e.semi_axes[0] * radius * math.cos(angle),
                    e.semi_axes[1] * radius * math.sin(angle),
                ]
            )
            pos += dt * velocity
        return float(np.hypot(*(pos - start)) - total)

    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        results = list(pool.map(excess, children))
    return max(results)
