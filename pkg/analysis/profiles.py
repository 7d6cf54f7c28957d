"""
Initial-data profiles for the focusing construction.

Every profile is evaluated together with its first two x1-derivatives (a
"jet"); the second derivatives are analytic, never finite differences.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special

from common.errors import DomainError
from common.models import ConstraintViolation, ProfileKind, ProfileParams

logger = logging.getLogger(__name__)

Jet = tuple[np.ndarray, np.ndarray, np.ndarray]

_GL_NODES, _GL_WEIGHTS = special.roots_legendre(64)


def validate_params(p: ProfileParams) -> list[ConstraintViolation]:
    """
    Check the exponent constraints of the construction.

    Args:
        p: Parameter tuple to check

    Returns:
        One entry per violated constraint with the amount it is missed by;
        empty when the tuple is admissible
    """
    violations: list[ConstraintViolation] = []

    def require(name: str, margin: float, strict: bool = True) -> None:
        # margin = lhs - rhs of "lhs < rhs" (or <=)
        if margin > 0 or (strict and margin == 0):
            violations.append(ConstraintViolation(constraint=name, margin=margin))

    require("2*alpha - 2*beta - delta < -1", p.dyadic_exponent + 1)
    require("alpha > 2*delta", 2 * p.delta - p.alpha)
    require("alpha <= 1", p.alpha - 1, strict=False)
    require("beta > 1/2", 0.5 - p.beta)
    if p.epsilon <= 0:
        violations.append(ConstraintViolation(constraint="0 < epsilon <= 1/2", margin=-p.epsilon))
    elif p.epsilon > 0.5:
        violations.append(
            ConstraintViolation(constraint="0 < epsilon <= 1/2", margin=p.epsilon - 0.5)
        )
    if p.lambda_ < 0:
        violations.append(ConstraintViolation(constraint="0 <= lambda < 1/8", margin=-p.lambda_))
    elif p.lambda_ >= 0.125:
        violations.append(
            ConstraintViolation(constraint="0 <= lambda < 1/8", margin=p.lambda_ - 0.125)
        )

    if violations:
        logger.debug(f"Parameter violations: {[v.constraint for v in violations]}")
    return violations


# Smooth building blocks


def smoothstep(s: np.ndarray, order: int = 0) -> np.ndarray:
    """Quintic smoothstep 6s^5 - 15s^4 + 10s^3 clamped to [0, 1], or a derivative."""
    s = np.asarray(s, dtype=float)
    inside = (s > 0) & (s < 1)
    c = np.clip(s, 0.0, 1.0)
    if order == 0:
        return c**3 * (c * (6 * c - 15) + 10)
    if order == 1:
        return np.where(inside, 30 * c**2 * (1 - c) ** 2, 0.0)
    if order == 2:
        return np.where(inside, 60 * c * (1 - c) * (1 - 2 * c), 0.0)
    raise ValueError(f"smoothstep derivative of order {order} not available")


def _exp_ramp(t: np.ndarray) -> Jet:
    """f(t) = exp(-1/t) for t > 0, else 0, with two derivatives."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    safe = np.where(pos, t, 1.0)
    f = np.where(pos, np.exp(-1.0 / safe), 0.0)
    f1 = np.where(pos, f / safe**2, 0.0)
    f2 = np.where(pos, f * (1 - 2 * safe) / safe**4, 0.0)
    return f, f1, f2


def smooth_transition(s: np.ndarray) -> Jet:
    """C-infinity transition q: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    a, a1, a2 = _exp_ramp(s)
    b, b1, b2 = _exp_ramp(1 - s)
    b1 = -b1
    total = a + b
    num = a1 * b - a * b1
    num1 = a2 * b - a * b2
    q = a / total
    q1 = num / total**2
    q2 = num1 / total**2 - 2 * num * (a1 + b1) / total**3
    return q, q1, q2


def _product(*jets: Jet) -> Jet:
    f, f1, f2 = jets[0]
    for g, g1, g2 in jets[1:]:
        f, f1, f2 = f * g, f1 * g + f * g1, f2 * g + 2 * f1 * g1 + f * g2
    return f, f1, f2


def _gauss_legendre(fn: Callable[[np.ndarray], np.ndarray], a, b) -> np.ndarray:
    """64-point Gauss-Legendre of fn over [a, b], vectorized over endpoint arrays."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    nodes = half * _GL_NODES + 0.5 * (a + b)
    return np.sum(fn(nodes) * _GL_WEIGHTS, axis=-1) * half[..., 0]


def _log_power(x: np.ndarray, alpha: float) -> np.ndarray:
    """|ln x|^alpha for x in (0, 1]."""
    return np.power(-np.log(x), alpha)


def _check_unit_interval(x: np.ndarray, name: str) -> None:
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        bad = x[(~np.isfinite(x)) | (x < 0) | (x > 1)]
        raise DomainError(f"{name} requires x1 in [0, 1], got {bad.ravel()[:3]}")


def _scalar_or_array(value: np.ndarray, like) -> float | np.ndarray:
    return float(value) if np.ndim(like) == 0 else value


# chi and its mollified version


def chi_values(x: np.ndarray, alpha: float) -> np.ndarray:
    """-int_0^x |ln s|^alpha ds through the regularized upper incomplete gamma."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = -special.gamma(alpha + 1) * special.gammaincc(alpha + 1, -np.log(x[pos]))
    return out


def chi(x1, p: ProfileParams) -> float | np.ndarray:
    x = np.asarray(x1, dtype=float)
    _check_unit_interval(x, "chi")
    return _scalar_or_array(chi_values(x, p.alpha), x1)


def chi_d1(x1, p: ProfileParams) -> float | np.ndarray:
    x = np.asarray(x1, dtype=float)
    _check_unit_interval(x, "chi_d1")
    with np.errstate(divide="ignore"):
        return _scalar_or_array(-_log_power(x, p.alpha), x1)


def chi_d2(x1, p: ProfileParams) -> float | np.ndarray:
    x = np.asarray(x1, dtype=float)
    _check_unit_interval(x, "chi_d2")
    with np.errstate(divide="ignore", invalid="ignore"):
        return _scalar_or_array(p.alpha * _log_power(x, p.alpha - 1) / x, x1)


def mollifier_jet(x: np.ndarray, epsilon: float) -> Jet:
    """psi_eps(x) = S(2x/eps - 1): 0 below eps/2, 1 above eps."""
    s = 2 * np.asarray(x, dtype=float) / epsilon - 1
    return (
        smoothstep(s),
        smoothstep(s, 1) * (2 / epsilon),
        smoothstep(s, 2) * (4 / epsilon**2),
    )


def _mollified_density(s: np.ndarray, p: ProfileParams) -> np.ndarray:
    return mollifier_jet(s, p.epsilon)[0] * _log_power(s, p.alpha)


@lru_cache(maxsize=256)
def transition_mass(p: ProfileParams) -> float:
    """int_{eps/2}^{eps} psi_eps |ln s|^alpha ds."""
    return float(_gauss_legendre(lambda s: _mollified_density(s, p), p.epsilon / 2, p.epsilon))


@lru_cache(maxsize=256)
def chi_eps_offset(p: ProfileParams) -> float:
    """Constant c with chi_eps = chi - c on [eps, 1]."""
    return float(chi_values(np.array(p.epsilon), p.alpha)) + transition_mass(p)


def chi_eps_values(x: np.ndarray, p: ProfileParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    eps = p.epsilon
    out = np.zeros_like(x)
    mid = (x > eps / 2) & (x < eps)
    if np.any(mid):
        out[mid] = -_gauss_legendre(lambda s: _mollified_density(s, p), eps / 2, x[mid])
    high = x >= eps
    if np.any(high):
        out[high] = chi_values(x[high], p.alpha) - chi_eps_offset(p)
    return out


def chi_eps_jet(x: np.ndarray, p: ProfileParams) -> Jet:
    x = np.asarray(x, dtype=float)
    value = chi_eps_values(x, p)
    m, m1, _ = mollifier_jet(x, p.epsilon)
    active = x > p.epsilon / 2
    safe = np.where(active, x, 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = _log_power(safe, p.alpha)
        lp1 = p.alpha * _log_power(safe, p.alpha - 1) / safe
    d1 = np.where(active, -m * lp, 0.0)
    d2 = np.where(active, -m1 * lp + m * lp1, 0.0)
    return value, d1, d2


def chi_eps(x1, p: ProfileParams) -> float | np.ndarray:
    x = np.asarray(x1, dtype=float)
    _check_unit_interval(x, "chi_eps")
    return _scalar_or_array(chi_eps_values(x, p), x1)


def chi_eps_d1(x1, p: ProfileParams) -> float | np.ndarray:
    x = np.asarray(x1, dtype=float)
    _check_unit_interval(x, "chi_eps_d1")
    return _scalar_or_array(chi_eps_jet(x, p)[1], x1)


def chi_eps_d2(x1, p: ProfileParams) -> float | np.ndarray:
    x = np.asarray(x1, dtype=float)
    _check_unit_interval(x, "chi_eps_d2")
    return _scalar_or_array(chi_eps_jet(x, p)[2], x1)


def _plain_increment(a: np.ndarray, b: np.ndarray, p: ProfileParams) -> np.ndarray:
    """int_a^b |ln s|^alpha ds for eps <= a <= b."""
    short = b <= 2 * a
    out = np.empty_like(a)
    if np.any(short):
        out[short] = _gauss_legendre(lambda s: _log_power(s, p.alpha), a[short], b[short])
    if np.any(~short):
        out[~short] = chi_values(a[~short], p.alpha) - chi_values(b[~short], p.alpha)
    return out


def chi_eps_increment(a, b, p: ProfileParams) -> np.ndarray:
    """
    chi_eps(b) - chi_eps(a) without cancellation.

    The interval is split at eps/2 and eps; each smooth piece is integrated
    directly, so the result keeps full relative accuracy for b close to a.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    eps = p.epsilon
    total = np.zeros_like(lo)

    m_lo = np.clip(lo, eps / 2, eps)
    m_hi = np.clip(hi, eps / 2, eps)
    mid = m_hi > m_lo
    if np.any(mid):
        total[mid] += _gauss_legendre(lambda s: _mollified_density(s, p), m_lo[mid], m_hi[mid])

    u_lo = np.maximum(lo, eps)
    upper = hi > u_lo
    if np.any(upper):
        total[upper] += _plain_increment(u_lo[upper], hi[upper], p)

    return np.where(b >= a, -total, total)


# Cutoffs


def cutoff_psi_jet(x: np.ndarray) -> Jet:
    """Even plateau psi: 1 on [-1/4, 1/4], 0 for |x| >= 1/2."""
    x = np.asarray(x, dtype=float)
    q, q1, q2 = smooth_transition(2 - 4 * np.abs(x))
    return q, -4 * np.sign(x) * q1, 16 * q2


def cutoff_psi(x) -> float | np.ndarray:
    return _scalar_or_array(cutoff_psi_jet(np.asarray(x, dtype=float))[0], x)


def late_cutoff_jet(x1: np.ndarray, p: ProfileParams) -> Jet:
    """l_eps(x1) = l(x1 |ln eps|^(alpha/2)) with l = 1 below 1 and 0 above 2."""
    c = p.log_eps ** (p.alpha / 2)
    q, q1, q2 = smooth_transition(2 - c * np.asarray(x1, dtype=float))
    return q, -c * q1, c**2 * q2


def late_cutoff(x1, p: ProfileParams) -> float | np.ndarray:
    return _scalar_or_array(late_cutoff_jet(np.asarray(x1, dtype=float), p)[0], x1)


def width_scale_jet(x1: np.ndarray, p: ProfileParams) -> Jet:
    """a(x1) = |ln x1|^delta / (w sqrt(x1)) on (0, 1)."""
    x = np.asarray(x1, dtype=float)
    lx = np.log(x)
    a = np.power(-lx, p.delta) / (p.width_factor * np.sqrt(x))
    r = (p.delta / lx - 0.5) / x
    r1 = (-p.delta / lx**2 - p.delta / lx + 0.5) / x**2
    return a, a * r, a * (r**2 + r1)


def kappa_jet(x1: np.ndarray, x2: np.ndarray, p: ProfileParams) -> Jet:
    """psi(a(x1) x2) and its x1-derivatives; zero outside 0 < x1 < 1."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    inside = (x1 > 0) & (x1 < 1)
    safe = np.where(inside, x1, 0.5)
    a, a1, a2 = width_scale_jet(safe, p)
    g, g1, g2 = cutoff_psi_jet(a * x2)
    k1 = g1 * a1 * x2
    k2 = g2 * (a1 * x2) ** 2 + g1 * a2 * x2
    zero = np.zeros_like(x1)
    return np.where(inside, g, zero), np.where(inside, k1, zero), np.where(inside, k2, zero)


def h_eps_jet(x1: np.ndarray, x2: np.ndarray, p: ProfileParams, late: bool | None = None) -> Jet:
    x1, x2 = np.broadcast_arrays(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    inside = (x1 > 0) & (x1 < 0.5)
    safe = np.where(inside, x1, 0.25)
    jets = [chi_eps_jet(safe, p), kappa_jet(safe, x2, p), cutoff_psi_jet(safe)]
    if p.late_cutoff if late is None else late:
        jets.append(late_cutoff_jet(safe, p))
    h, h1, h2 = _product(*jets)
    zero = np.zeros_like(x1)
    return np.where(inside, h, zero), np.where(inside, h1, zero), np.where(inside, h2, zero)


def h_eps(x1, x2, p: ProfileParams, late: bool | None = None) -> float | np.ndarray:
    """chi_eps(x1) psi(|ln x1|^delta x2 / (w sqrt x1)) psi(x1), optionally times l_eps."""
    return _scalar_or_array(h_eps_jet(x1, x2, p, late)[0], np.broadcast(x1, x2))


def dyadic_zeta_jet(x: np.ndarray) -> Jet:
    """zeta(x) = S(log2 x + 1) - S(log2 x), supported in (1/2, 2)."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    safe = np.where(pos, x, 1.0)
    u = np.log2(safe)
    ln2 = math.log(2)
    z = smoothstep(u + 1) - smoothstep(u)
    du = smoothstep(u + 1, 1) - smoothstep(u, 1)
    ddu = smoothstep(u + 1, 2) - smoothstep(u, 2)
    z1 = du / (safe * ln2)
    z2 = (ddu / ln2**2 - du / ln2) / safe**2
    zero = np.zeros_like(x)
    return np.where(pos, z, zero), np.where(pos, z1, zero), np.where(pos, z2, zero)


# Profile objects


@dataclass(frozen=True)
class Profile:
    kind: ProfileKind
    params: ProfileParams
    jet: Callable[..., Jet]
    dims: int = 1
    label: str = ""
    support: tuple[float, float] | None = None
    derivative_order_supported: int = 2

    def derivatives(self, x1, x2=None) -> Jet:
        x1 = np.asarray(x1, dtype=float)
        if self.dims == 2:
            if x2 is None:
                raise DomainError(f"{self.kind.value} profile needs both x1 and x2")
            return self.jet(x1, np.asarray(x2, dtype=float))
        return self.jet(x1)

    def eval(self, x1, x2=None, order: int = 0) -> float | np.ndarray:
        if not 0 <= order <= self.derivative_order_supported:
            raise ValueError(f"derivative order {order} not supported")
        value = self.derivatives(x1, x2)[order]
        like = np.broadcast(x1, x2) if self.dims == 2 else x1
        return _scalar_or_array(value, like)

    def __call__(self, x1, x2=None) -> float | np.ndarray:
        return self.eval(x1, x2)

    @property
    def name(self) -> str:
        return self.label or self.kind.value


def make_profile(kind: ProfileKind | str, p: ProfileParams) -> Profile:
    kind = ProfileKind(kind)
    eps = p.epsilon
    match kind:
        case ProfileKind.CHI:
            def jet(x):
                _check_unit_interval(x, "chi")
                with np.errstate(divide="ignore", invalid="ignore"):
                    return chi_values(x, p.alpha), -_log_power(x, p.alpha), (
                        p.alpha * _log_power(x, p.alpha - 1) / x
                    )

            return Profile(kind, p, jet, support=(0.0, 1.0))
        case ProfileKind.CHI_EPS:
            def jet(x):
                _check_unit_interval(x, "chi_eps")
                return chi_eps_jet(x, p)

            return Profile(kind, p, jet, support=(eps / 2, 1.0))
        case ProfileKind.MOLLIFIER_PSI_EPS:
            return Profile(kind, p, lambda x: mollifier_jet(x, eps))
        case ProfileKind.CUTOFF_PSI:
            return Profile(kind, p, cutoff_psi_jet, support=(-0.5, 0.5))
        case ProfileKind.KAPPA:
            return Profile(kind, p, lambda x1, x2: kappa_jet(x1, x2, p), dims=2)
        case ProfileKind.DYADIC_ZETA:
            return Profile(kind, p, dyadic_zeta_jet, support=(0.5, 2.0))
        case ProfileKind.H_EPS:
            return Profile(
                kind, p, lambda x1, x2: h_eps_jet(x1, x2, p), dims=2, support=(eps / 2, 0.5)
            )
    raise ValueError(f"unknown profile kind {kind!r}")


def dyadic_block(j: int, f: Profile) -> Profile:
    """zeta(2^j x1) f, supported in (2^-(j+1), 2^(1-j))."""
    if j < 0:
        raise DomainError(f"dyadic block index must be >= 0, got {j}")
    scale = 2.0**j

    def block_jet(x1, *rest):
        z, z1, z2 = dyadic_zeta_jet(np.asarray(x1) * scale)
        zeta = (z, z1 * scale, z2 * scale**2)
        return _product(zeta, f.jet(x1, *rest))

    return Profile(
        kind=f.kind,
        params=f.params,
        jet=block_jet,
        dims=f.dims,
        label=f"{f.name}[j={j}]",
        support=(scale**-1 / 2, 2 / scale),
    )


def write_profile_csv(profile: Profile, grid: np.ndarray, path: Path, x2: float = 0.0) -> Path:
    """Tabulate (x1, value, d1, d2) with a header naming the kind and params."""
    grid = np.asarray(grid, dtype=float)
    values = profile.derivatives(grid, np.full_like(grid, x2) if profile.dims == 2 else None)
    p = profile.params
    header = (
        f"# kind={profile.name} alpha={p.alpha!r} beta={p.beta!r} delta={p.delta!r} "
        f"epsilon={p.epsilon!r} lambda={p.lambda_!r} width_factor={p.width_factor!r}"
        + (f" x2={x2!r}" if profile.dims == 2 else "")
        + "\nx1,value,d1,d2"
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack([grid, *values]), delimiter=",", header=header, comments="")
    logger.info(f"Wrote {grid.size} samples of {profile.name} to {path}")
    return path
