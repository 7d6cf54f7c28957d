"""
Fractional and log-perturbed Sobolev norms of sampled fields.

Two independent routes: a weighted Fourier integral with continuum
normalization exp(-2 pi i <x, xi>), and for the directional x1 norm of order
7/4 - lambda the pairing of f_x1x1 against the kernel |x1 - y|^(-1/2 + 2 lambda).
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from analysis.quadrature import hat_pairing_matrix
from common.errors import PreconditionError
from common.models import (
    Directional,
    EmbeddingReport,
    GridInfo,
    NormReport,
    NormSpec,
    UpgradeReport,
)

logger = logging.getLogger(__name__)

MIN_PADDING = 4
COMPACT_REL = 1e-12


@dataclass(frozen=True)
class SampledField2D:
    """Samples values[i1, i2] at (origin1 + i1 h1, origin2 + i2 h2)."""

    values: np.ndarray
    h1: float
    h2: float
    origin: tuple[float, float] = (0.0, 0.0)
    padding: int = MIN_PADDING
    d2_x1: np.ndarray | None = None

    @classmethod
    def from_function(
        cls,
        fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
        x1_range: tuple[float, float],
        x2_range: tuple[float, float],
        n1: int,
        n2: int,
        padding: int = MIN_PADDING,
        d2_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    ) -> "SampledField2D":
        """Sample fn on an n1 x n2 grid including both box edges."""
        x1 = np.linspace(*x1_range, n1)
        x2 = np.linspace(*x2_range, n2)
        grid1, grid2 = np.meshgrid(x1, x2, indexing="ij")
        return cls(
            values=np.asarray(fn(grid1, grid2), dtype=float),
            h1=float(x1[1] - x1[0]),
            h2=float(x2[1] - x2[0]),
            origin=(float(x1[0]), float(x2[0])),
            padding=padding,
            d2_x1=None if d2_fn is None else np.asarray(d2_fn(grid1, grid2), dtype=float),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def x1(self) -> np.ndarray:
        return self.origin[0] + self.h1 * np.arange(self.shape[0])

    @property
    def x2(self) -> np.ndarray:
        return self.origin[1] + self.h2 * np.arange(self.shape[1])

    @property
    def grid_info(self) -> GridInfo:
        return GridInfo(
            n1=self.shape[0], n2=self.shape[1], h1=self.h1, h2=self.h2, padding=self.padding
        )

    @property
    def boundary_max(self) -> float:
        v = np.abs(self.values)
        return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max()))

    def require_compact(self) -> None:
        if self.padding < MIN_PADDING:
            raise PreconditionError(
                f"spectral norms need padding >= {MIN_PADDING}, got {self.padding}"
            )
        scale = float(np.abs(self.values).max())
        if self.boundary_max > COMPACT_REL * scale:
            raise PreconditionError(
                f"field is not compactly supported in its box: boundary max "
                f"{self.boundary_max:.3e} vs peak {scale:.3e}"
            )

    def coarsened(self) -> "SampledField2D":
        """Every other sample in both directions."""
        return replace(
            self,
            values=self.values[::2, ::2],
            h1=2 * self.h1,
            h2=2 * self.h2,
            d2_x1=None if self.d2_x1 is None else self.d2_x1[::2, ::2],
        )

    def rescaled(self, lam: float, omega: float, gamma: float) -> "SampledField2D":
        """lam^omega f(lam^gamma x), exactly on the dilated grid."""
        stretch = lam**-gamma
        return replace(
            self,
            values=self.values * lam**omega,
            h1=self.h1 * stretch,
            h2=self.h2 * stretch,
            origin=(self.origin[0] * stretch, self.origin[1] * stretch),
            d2_x1=None if self.d2_x1 is None else self.d2_x1 * lam ** (omega + 2 * gamma),
        )

    def translated(self, shift1: float, shift2: float = 0.0) -> "SampledField2D":
        return replace(self, origin=(self.origin[0] + shift1, self.origin[1] + shift2))

    def with_values(self, values: np.ndarray, d2_x1: np.ndarray | None = None) -> "SampledField2D":
        return replace(self, values=values, d2_x1=d2_x1)

    def _check_same_grid(self, other: "SampledField2D") -> None:
        if (
            self.shape != other.shape
            or not math.isclose(self.h1, other.h1)
            or not math.isclose(self.h2, other.h2)
        ):
            raise PreconditionError("fields live on different grids")

    def __add__(self, other: "SampledField2D") -> "SampledField2D":
        self._check_same_grid(other)
        d2 = None
        if self.d2_x1 is not None and other.d2_x1 is not None:
            d2 = self.d2_x1 + other.d2_x1
        return replace(self, values=self.values + other.values, d2_x1=d2)

    def __mul__(self, scalar: float) -> "SampledField2D":
        d2 = None if self.d2_x1 is None else self.d2_x1 * scalar
        return replace(self, values=self.values * scalar, d2_x1=d2)

    __rmul__ = __mul__


def l2_norm(f: SampledField2D) -> float:
    return math.sqrt(f.h1 * f.h2 * float(np.sum(f.values**2)))


def fourier_transform(f: SampledField2D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Continuum-normalized transform on the zero-padded grid.

    Returns:
        (xi1, xi2, |f_hat|^2) with xi in fftfreq order; the modulus drops the
        phase of the grid origin
    """
    m1, m2 = f.padding * f.shape[0], f.padding * f.shape[1]
    spectrum = np.fft.fft2(f.values, s=(m1, m2)) * (f.h1 * f.h2)
    xi1 = np.fft.fftfreq(m1, d=f.h1)
    xi2 = np.fft.fftfreq(m2, d=f.h2)
    return xi1, xi2, np.abs(spectrum) ** 2


def frequency_weight(r: np.ndarray, spec: NormSpec) -> np.ndarray:
    """
    Weight w with ||f||^2 = int w(xi)^2 |f_hat|^2.

    Homogeneous: |xi|^s / (1 + |ln|xi||)^beta, set to 0 at xi = 0 unless
    s = beta = 0. Inhomogeneous: <xi>^s / (1 + ln<xi>)^beta with
    <xi> = sqrt(1 + |xi|^2).
    """
    r = np.asarray(r, dtype=float)
    if not spec.homogeneous:
        bracket = np.sqrt(1 + r**2)
        return bracket**spec.s / (1 + np.log(bracket)) ** spec.beta
    zero = r == 0
    safe = np.where(zero, 1.0, r)
    weight = safe**spec.s / (1 + np.abs(np.log(safe))) ** spec.beta
    at_zero = 1.0 if spec.s == 0 and spec.beta == 0 else 0.0
    return np.where(zero, at_zero, weight)


def _frequency_radius(xi1: np.ndarray, xi2: np.ndarray, directional: Directional) -> np.ndarray:
    if directional == Directional.X1:
        return np.broadcast_to(np.abs(xi1)[:, None], (len(xi1), len(xi2)))
    return np.hypot(xi1[:, None], xi2[None, :])


def _origin_correction(f: SampledField2D, spec: NormSpec, step: float) -> float:
    """
    Excess of the xi1 frequency sum over the integral at the zero of |xi1|^(2s).

    With a = 2s and Phi(xi1) the power integrated over xi2, the padded sum
    overshoots by 2 zeta(-a) Phi(0) step^(a+1) + zeta(-a-2) Phi(0) step^(a+3).
    The step only depends on the padded box length, so left alone this is an
    error that does not shrink with h. Phi(0) and Phi(0) come from x1 moments.
    """
    a = 2 * spec.s
    x = f.x1 - f.x1.mean()
    m0 = f.h1 * f.values.sum(axis=0)
    m1 = f.h1 * (x @ f.values)
    m2 = f.h1 * ((x**2) @ f.values)
    phi0 = f.h2 * float(np.sum(m0**2))
    phi2 = f.h2 * 8 * math.pi**2 * float(np.sum(m1**2 - m0 * m2))
    return float(
        2 * special.zeta(-a) * phi0 * step ** (a + 1)
        + special.zeta(-a - 2) * phi2 * step ** (a + 3)
    )


def _fourier_norm_sq(f: SampledField2D, spec: NormSpec) -> float:
    xi1, xi2, power = fourier_transform(f)
    weight = frequency_weight(_frequency_radius(xi1, xi2, spec.directional), spec)
    cell = (xi1[1] - xi1[0]) * (xi2[1] - xi2[0])
    total = float(np.sum(weight**2 * power) * cell)
    if spec.directional == Directional.X1 and spec.homogeneous and spec.beta == 0 and spec.s > 0:
        total -= _origin_correction(f, spec, float(xi1[1] - xi1[0]))
    return total


def fourier_norm(f: SampledField2D, spec: NormSpec) -> float:
    """
    Weighted L2 norm of f_hat per the norm spec.

    Args:
        f: Compactly supported sampled field with padding >= 4
        spec: Order, log exponent, homogeneity and direction

    Returns:
        The norm (not its square)

    Raises:
        PreconditionError: If f is unpadded or touches its box boundary
    """
    f.require_compact()
    return math.sqrt(max(_fourier_norm_sq(f, spec), 0.0))


def _norm_kind(spec: NormSpec) -> str:
    kind = "homogeneous" if spec.homogeneous else "inhomogeneous"
    if spec.directional == Directional.X1:
        kind += "-x1"
    if spec.beta > 0:
        kind += "-log"
    return kind


def norm_report(f: SampledField2D, spec: NormSpec, lam: float | None = None) -> NormReport:
    """Fourier norm with a two-resolution error estimate."""
    value = fourier_norm(f, spec)
    coarse = math.sqrt(max(_fourier_norm_sq(f.coarsened(), spec), 0.0))
    return NormReport(
        norm_kind=_norm_kind(spec),
        s=spec.s,
        beta=spec.beta,
        lambda_=lam,
        value=value,
        error_estimate=abs(value - coarse),
        grid=f.grid_info,
        method="fourier",
    )


# Kernel representation of the directional norm of order 7/4 - lambda


def riesz_constant(lam: float) -> float:
    """Constant c with F^-1[|xi|^(-1/2-2 lam)] = c |x|^(-1/2+2 lam) on the line."""
    return math.pi ** (2 * lam) * special.gamma(0.25 - lam) / special.gamma(0.25 + lam)


def kernel_constant(lam: float) -> float:
    """C(lam) = (2 pi)^(-1/2-2 lam) pi^(2 lam) Gamma(1/4 - lam) / Gamma(1/4 + lam)."""
    return (2 * math.pi) ** (-0.5 - 2 * lam) * riesz_constant(lam)


def kernel_exponent(lam: float) -> float:
    _check_lambda(lam)
    return -0.5 + 2 * lam


def kernel_prefactor(lam: float) -> float:
    """Factor turning the raw f_x1x1 pairing into the squared norm."""
    return kernel_constant(lam) * (2 * math.pi) ** -(3.5 - 2 * lam)


def _check_lambda(lam: float) -> None:
    if not 0 <= lam < 0.125:
        raise PreconditionError(f"kernel norm needs 0 <= lambda < 1/8, got {lam}")


def spectral_derivative_x1(f: SampledField2D, order: int = 2) -> np.ndarray:
    m1 = f.padding * f.shape[0]
    spectrum = np.fft.fft(f.values, n=m1, axis=0)
    xi1 = np.fft.fftfreq(m1, d=f.h1)
    spectrum *= ((2j * math.pi * xi1) ** order)[:, None]
    return np.real(np.fft.ifft(spectrum, axis=0))[: f.shape[0]]


def _second_derivative(f: SampledField2D) -> np.ndarray:
    return f.d2_x1 if f.d2_x1 is not None else spectral_derivative_x1(f, 2)


def kernel_pairing_x1(f: SampledField2D, g: SampledField2D, lam: float) -> float:
    """Bilinear form whose diagonal is the squared directional norm of order 7/4 - lam."""
    f._check_same_grid(g)
    p = kernel_exponent(lam)
    pairing = hat_pairing_matrix(f.shape[0], f.h1, p)
    fxx, gxx = _second_derivative(f), _second_derivative(g)
    raw = f.h2 * float(np.einsum("ik,ij,jk->", fxx, pairing, gxx))
    return kernel_prefactor(lam) * raw


def kernel_norm_x1(f: SampledField2D, lam: float) -> float:
    """
    Directional norm of order 7/4 - lam via the singular kernel pairing.

    Raises:
        PreconditionError: If lam is outside [0, 1/8)
    """
    _check_lambda(lam)
    value = kernel_pairing_x1(f, f, lam)
    if value < 0:
        logger.warning(f"Kernel pairing came out negative ({value:.3e}); clamping to 0")
    return math.sqrt(max(value, 0.0))


# Embedding checks


def embedding_check(f: SampledField2D, s: float, beta: float, lambda_: float) -> EmbeddingReport:
    """Compare the log-perturbed, plain, lowered and inhomogeneous norms of f."""
    log_norm = fourier_norm(f, NormSpec(s=s, beta=beta))
    plain = fourier_norm(f, NormSpec(s=s))
    lowered = fourier_norm(f, NormSpec(s=max(s - lambda_, 0.0)))
    inhomogeneous = fourier_norm(f, NormSpec(s=s, homogeneous=False))
    return EmbeddingReport(
        log_norm=log_norm,
        plain_norm=plain,
        lowered_norm=lowered,
        inhomogeneous_norm=inhomogeneous,
        log_le_plain=log_norm <= plain,
        inhomogeneous_ge_homogeneous=inhomogeneous >= plain * (1 - 1e-12),
    )


def compact_support_upgrade(f: SampledField2D, s: float, beta: float) -> UpgradeReport:
    """
    Check that the inhomogeneous log norm is controlled by L2 and homogeneous parts.

    Splitting the frequency integral at |xi| = 1 gives
    ||f||^2_inh <= 2^s ||f||^2_L2 + 2^s ||f||^2_hom for the log weights.
    """
    f.require_compact()
    xi1, xi2, power = fourier_transform(f)
    radius = _frequency_radius(xi1, xi2, Directional.NONE)
    cell = (xi1[1] - xi1[0]) * (xi2[1] - xi2[0])
    inh = frequency_weight(radius, NormSpec(s=s, beta=beta, homogeneous=False)) ** 2 * power
    low = radius <= 1
    low_term = float(np.sum(np.where(low, inh, 0.0)) * cell)
    high_term = float(np.sum(np.where(low, 0.0, inh)) * cell)
    lhs = float(np.sum(inh) * cell)
    l2_sq = float(np.sum(power) * cell)
    hom_sq = _fourier_norm_sq(f, NormSpec(s=s, beta=beta))
    rhs = 2**s * l2_sq + 2**s * hom_sq
    return UpgradeReport(
        lhs=lhs,
        low_frequency_term=low_term,
        high_frequency_term=high_term,
        rhs=rhs,
        slack=rhs - lhs,
        passed=lhs <= rhs,
    )
