"""
Exact evolution of the reduced problem along characteristics.

With v = Du the reduced equation transports v at speed (1+v)/(1-v), so
x1 = phi(t, y) = y + t (1 + chi_eps(y)) / (1 - chi_eps(y)) and
v(t, phi(t, y)) = chi_eps(y) until the characteristics first meet.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize

from analysis.profiles import (
    Profile,
    chi_eps_increment,
    chi_eps_jet,
    make_profile,
)
from common.errors import NonUniqueMaximizerError, PreconditionError, RangeError
from common.models import ProfileKind, ProfileParams

logger = logging.getLogger(__name__)

UNIQUENESS_REL = 1e-8
BISECTION_STEPS = 64


class PhiJet(NamedTuple):
    phi: np.ndarray
    phi_y: np.ndarray
    phi_yy: np.ndarray
    phi_ty: np.ndarray
    phi_tyy: np.ndarray


class FieldJet(NamedTuple):
    v: np.ndarray
    v_x: np.ndarray
    v_xx: np.ndarray


@dataclass(frozen=True)
class FieldSample:
    t: float
    grid: np.ndarray
    v: np.ndarray
    v_x: np.ndarray
    v_xx: np.ndarray

    def __post_init__(self):
        n = len(self.grid)
        if not (len(self.v) == len(self.v_x) == len(self.v_xx) == n):
            raise ValueError("FieldSample arrays must have equal length")

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(
            path,
            np.column_stack([self.grid, self.v, self.v_x, self.v_xx]),
            delimiter=",",
            header=f"# t={self.t!r}\nx1,v,v_x,v_xx",
            comments="",
        )
        return path


def focusing_rate(y, p: ProfileParams) -> np.ndarray:
    """|chi_eps'| / (1 - chi_eps)^2; phi_y = 1 - 2 t * rate."""
    c, c1, _ = chi_eps_jet(np.asarray(y, dtype=float), p)
    return -c1 / (1 - c) ** 2


def focusing_rate_d1(y, p: ProfileParams) -> np.ndarray:
    c, c1, c2 = chi_eps_jet(np.asarray(y, dtype=float), p)
    return -(c2 * (1 - c) + 2 * c1**2) / (1 - c) ** 3


def _local_maxima(values: np.ndarray) -> np.ndarray:
    padded = np.concatenate([[-np.inf], values, [-np.inf]])
    peaks = (padded[1:-1] >= padded[:-2]) & (padded[1:-1] > padded[2:])
    return np.flatnonzero(peaks)


@dataclass(frozen=True)
class CharFlow:
    params: ProfileParams
    chi: Profile
    t_eps: float
    nu_eps: float
    M_eps: float

    @property
    def focuses(self) -> bool:
        return self.M_eps > 0

    def _chi(self, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return chi_eps_jet(np.asarray(y, dtype=float), self.params)

    def derivatives(self, t, y) -> PhiJet:
        c, c1, c2 = self._chi(y)
        y = np.asarray(y, dtype=float)
        one_minus = 1 - c
        curvature = 2 * (c2 * one_minus + 2 * c1**2) / one_minus**3
        phi_ty = 2 * c1 / one_minus**2
        return PhiJet(
            phi=y + t * (1 + c) / one_minus,
            phi_y=1 + t * phi_ty,
            phi_yy=t * curvature,
            phi_ty=phi_ty,
            phi_tyy=curvature,
        )

    def phi(self, t, y) -> np.ndarray:
        c = self._chi(y)[0]
        return np.asarray(y, dtype=float) + t * (1 + c) / (1 - c)

    def phi_y(self, t, y) -> np.ndarray:
        return self.derivatives(t, y).phi_y

    def phi_yy(self, t, y) -> np.ndarray:
        return self.derivatives(t, y).phi_yy

    def phi_ty(self, t, y) -> np.ndarray:
        return self.derivatives(t, y).phi_ty

    def phi_tyy(self, t, y) -> np.ndarray:
        return self.derivatives(t, y).phi_tyy

    def phi_offset(self, t, y, y0) -> np.ndarray:
        """phi(t, y) - phi(t, y0) without cancellation."""
        y, y0 = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(y0, dtype=float))
        c = self._chi(y)[0]
        c0 = self._chi(y0)[0]
        dc = chi_eps_increment(y0, y, self.params)
        return (y - y0) + 2 * t * dc / ((1 - c) * (1 - c0))

    def _require_before_blowup(self, t: float) -> None:
        if t < 0 or t >= self.t_eps:
            raise PreconditionError(
                f"time t={t!r} must lie in [0, t_eps) with t_eps={self.t_eps!r}"
            )

    def invert_phi(self, t: float, x1) -> np.ndarray:
        """
        Find the Lagrangian label y with phi(t, y) = x1.

        Args:
            t: Time strictly before the focusing time
            x1: Eulerian position(s) in [phi(t, 0), phi(t, 1/2)]

        Returns:
            Labels y in [0, 1/2], same shape as x1

        Raises:
            PreconditionError: If t >= t_eps
            RangeError: If x1 leaves the image of [0, 1/2]
        """
        self._require_before_blowup(t)
        x = np.asarray(x1, dtype=float)
        left, right = float(self.phi(t, 0.0)), float(self.phi(t, 0.5))
        slack = 1e-12 * (1 + np.abs(x))
        if np.any(x < left - slack) or np.any(x > right + slack):
            raise RangeError(
                f"x1 outside [{left!r}, {right!r}] at t={t!r}: "
                f"min={float(np.min(x))!r}, max={float(np.max(x))!r}"
            )
        if t == 0:
            return x.copy()
        lo = np.zeros_like(x)
        hi = np.full_like(x, 0.5)
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = self.phi(t, mid) < x
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def invert_offset(self, t: float, xi, y0: float, lo: float, hi: float) -> np.ndarray:
        """Solve phi_offset(t, y, y0) = xi for y in [lo, hi] by bisection."""
        self._require_before_blowup(t)
        xi = np.asarray(xi, dtype=float)
        a = np.full_like(xi, lo)
        b = np.full_like(xi, hi)
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (a + b)
            below = self.phi_offset(t, mid, y0) < xi
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        return 0.5 * (a + b)

    def field_jet(self, t: float, y) -> FieldJet:
        """v, v_x, v_xx at the Eulerian points phi(t, y)."""
        c, c1, c2 = self._chi(y)
        d = self.derivatives(t, y)
        return FieldJet(
            v=c,
            v_x=c1 / d.phi_y,
            v_xx=(c2 * d.phi_y - c1 * d.phi_yy) / d.phi_y**3,
        )

    def sample_field(self, t: float, grid) -> FieldSample:
        grid = np.asarray(grid, dtype=float)
        y = self.invert_phi(t, grid)
        jet = self.field_jet(t, y)
        return FieldSample(t=t, grid=grid, v=jet.v, v_x=jet.v_x, v_xx=jet.v_xx)

    def focus_grid(
        self,
        t: float,
        n_uniform: int = 400,
        ratio: float = 1.05,
        h_min: float | None = None,
    ) -> np.ndarray:
        """Eulerian nodes on [phi(t,0), phi(t,1/2)] refined geometrically toward phi(t, nu)."""
        left, right = float(self.phi(t, 0.0)), float(self.phi(t, 0.5))
        if not self.focuses:
            return np.linspace(left, right, n_uniform)
        center = float(self.phi(t, self.nu_eps))
        return refined_grid(left, right, center, (right - left) / n_uniform, ratio, h_min)

    def comparison_bounds(
        self, eta: float, tau_fractions, n: int = 201
    ) -> tuple[float, float]:
        """
        Measure C1, C2 with C1 ((y-nu)^2 + t_eps - t) <= phi_y <= C2 (...).

        Returns:
            (min, max) of the comparison ratio over the (y, t) grid
        """
        y = np.linspace(self.nu_eps - eta, self.nu_eps + eta, n)
        ratios = []
        for frac in tau_fractions:
            tau = frac * self.t_eps
            t = self.t_eps - tau
            ratios.append(self.phi_y(t, y) / ((y - self.nu_eps) ** 2 + tau))
        ratios = np.concatenate(ratios)
        return float(ratios.min()), float(ratios.max())


def refined_grid(
    left: float,
    right: float,
    center: float,
    h_max: float,
    ratio: float = 1.05,
    h_min: float | None = None,
) -> np.ndarray:
    """Nodes with spacing h_min at center growing by ratio up to h_max."""
    h_min = h_max / 100 if h_min is None else min(h_min, h_max)
    center = min(max(center, left), right)

    def side(length: float) -> np.ndarray:
        offsets = [0.0]
        h = h_min
        while offsets[-1] + h < length:
            offsets.append(offsets[-1] + h)
            h = min(h * ratio, h_max)
        if length > 0 and length - offsets[-1] < 0.5 * h and len(offsets) > 1:
            offsets[-1] = length
        elif length > 0:
            offsets.append(length)
        return np.asarray(offsets)

    left_part = center - side(center - left)[::-1]
    right_part = center + side(right - center)[1:]
    nodes = np.concatenate([left_part, right_part])
    nodes[0], nodes[-1] = left, right
    return nodes


def compute_blowup(p: ProfileParams, scan_points: int = 100_000) -> CharFlow:
    """
    Locate the first focusing of characteristics.

    The rate |chi_eps'|/(1-chi_eps)^2 is scanned on a log-spaced grid over
    [eps/2, 1/2], refined by golden-section search and polished by a root
    solve of its derivative. Characteristics meet at t_eps = 1/(2 M_eps).

    Args:
        p: Profile parameters
        scan_points: Size of the log-spaced scan

    Returns:
        CharFlow; M_eps = 0 and t_eps = inf when nothing focuses

    Raises:
        NonUniqueMaximizerError: If a second local maximum comes within
            relative 1e-8 of the global one
    """
    chi_profile = make_profile(ProfileKind.CHI_EPS, p)
    lo, hi = p.epsilon / 2, 0.5
    if lo >= hi:
        logger.info(f"No focusing for epsilon={p.epsilon}: chi_eps vanishes on [0, 1/2]")
        return CharFlow(p, chi_profile, math.inf, math.nan, 0.0)

    ys = np.geomspace(lo, hi, scan_points)
    rates = focusing_rate(ys, p)
    if rates.max() <= 0:
        return CharFlow(p, chi_profile, math.inf, math.nan, 0.0)

    peaks = _local_maxima(rates)
    order = peaks[np.argsort(rates[peaks])[::-1]]
    best = int(order[0])
    rivals = [int(k) for k in order[1:] if abs(k - best) > 2]
    if rivals and rates[rivals[0]] >= rates[best] * (1 - UNIQUENESS_REL):
        raise NonUniqueMaximizerError(
            [(float(ys[k]), float(rates[k])) for k in [best, *rivals[:4]]]
        )

    a = ys[max(best - 1, 0)]
    b = ys[min(best + 1, scan_points - 1)]
    nu = float(ys[best])
    if a < nu < b:
        try:
            result = optimize.minimize_scalar(
                lambda y: -float(focusing_rate(y, p)),
                bracket=(a, nu, b),
                method="golden",
                tol=1e-12,
            )
            nu = float(result.x)
        except ValueError as e:
            # flat top: the scan point already is the best estimate
            logger.debug(f"Golden-section refinement skipped: {e}")

    da, db = float(focusing_rate_d1(a, p)), float(focusing_rate_d1(b, p))
    if da > 0 > db:
        nu = optimize.brentq(lambda y: float(focusing_rate_d1(y, p)), a, b, xtol=1e-15, rtol=1e-15)

    m_eps = float(focusing_rate(nu, p))
    t_eps = 1.0 / (2.0 * m_eps)
    logger.info(
        f"Blow-up for epsilon={p.epsilon:g}: nu_eps={nu:.12g}, M_eps={m_eps:.12g}, "
        f"t_eps={t_eps:.12g}"
    )
    return CharFlow(p, chi_profile, t_eps, nu, m_eps)
