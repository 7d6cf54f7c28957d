"""Product quadrature for integrals against the weakly singular kernel |x - u|^p."""

import logging

import numpy as np
from scipy import special

from common.errors import PreconditionError
from common.metrics import QUADRATURE_NODES

logger = logging.getLogger(__name__)


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = special.roots_legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=float)
    h = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _power_moment(s: np.ndarray, p: float, k: int) -> np.ndarray:
    """Antiderivative of s^k |s|^p."""
    return np.sign(s) ** (k + 1) * np.abs(s) ** (p + k + 1) / (p + k + 1)


def _linear_weights(nodes: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell weights of piecewise-linear product integration, shape (N, N-1)."""
    h = np.diff(nodes)
    a = nodes[None, :-1] - nodes[:, None]
    b = nodes[None, 1:] - nodes[:, None]
    i0 = _power_moment(b, p, 0) - _power_moment(a, p, 0)
    i1 = _power_moment(b, p, 1) - _power_moment(a, p, 1)
    # int (u - x_k) |x_i - u|^p du over the cell
    first = i1 - a * i0
    right = first / h
    return i0 - right, right


def _cubic_cell_weights(
    nodes: np.ndarray, p: float, rows: np.ndarray, cells: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """4-point Lagrange product weights for cell [x_c, x_{c+1}] seen from x_i."""
    n = len(nodes)
    start = np.clip(cells - 1, 0, n - 4)
    stencil = start[:, None] + np.arange(4)[None, :]
    scale = nodes[cells + 1] - nodes[cells]
    origin = nodes[rows]
    sigma = (nodes[stencil] - origin[:, None]) / scale[:, None]
    lo = (nodes[cells] - origin) / scale
    hi = (nodes[cells + 1] - origin) / scale
    moments = np.stack(
        [_power_moment(hi, p, k) - _power_moment(lo, p, k) for k in range(4)], axis=-1
    )
    vander = np.stack([sigma**k for k in range(4)], axis=1)
    weights = np.linalg.solve(vander, moments[..., None])[..., 0]
    return stencil, weights * scale[:, None] ** (p + 1)


def singular_weight_matrix(nodes: np.ndarray, p: float) -> np.ndarray:
    """
    Matrix W with (W f)_i ~ int |x_i - u|^p f(u) du over the node span.

    Cells away from x_i use exact moments of the linear interpolant; the two
    cells touching x_i use a cubic product rule exact for polynomials of
    degree 3 against the weight.

    Args:
        nodes: Strictly increasing nodes, at least 4
        p: Kernel exponent in (-1, 0]

    Returns:
        Dense (N, N) weight matrix
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if n < 4:
        raise PreconditionError(f"singular quadrature needs at least 4 nodes, got {n}")
    if not -1 < p <= 0:
        raise PreconditionError(f"kernel exponent must lie in (-1, 0], got {p}")
    if np.any(np.diff(nodes) <= 0):
        raise PreconditionError("quadrature nodes must be strictly increasing")
    QUADRATURE_NODES.labels(operation="singular_weight_matrix").observe(n)

    left, right = _linear_weights(nodes, p)
    rows = np.arange(n)
    near = np.zeros((n, n - 1), dtype=bool)
    near[rows[1:], rows[1:] - 1] = True
    near[rows[:-1], rows[:-1]] = True
    left[near] = 0.0
    right[near] = 0.0

    weights = np.zeros((n, n))
    weights[:, :-1] += left
    weights[:, 1:] += right

    row_idx, cell_idx = np.nonzero(near)
    stencil, cubic = _cubic_cell_weights(nodes, p, row_idx, cell_idx)
    np.add.at(weights, (np.repeat(row_idx, 4), stencil.ravel()), cubic.ravel())
    return weights


def pairing_matrix(nodes: np.ndarray, p: float) -> np.ndarray:
    """Symmetric B with g^T B g ~ int int g(x) |x - u|^p g(u) du dx."""
    outer = trapezoid_weights(nodes)
    weighted = outer[:, None] * singular_weight_matrix(nodes, p)
    return 0.5 * (weighted + weighted.T)


def _cubic_bspline(z: np.ndarray) -> np.ndarray:
    """Centered cubic B-spline on [-2, 2], the self-convolution of the unit hat."""
    a = np.abs(z)
    return np.where(a <= 1, 2 / 3 - a**2 + a**3 / 2, np.where(a <= 2, (2 - a) ** 3 / 6, 0.0))


def _hat_kernel_moments(m: np.ndarray, p: float) -> np.ndarray:
    """
    beta(m) = int B3(z) |z + m|^p dz for integer offsets m >= 0.

    Offsets up to 2 use the fourth central difference of the fourth
    antiderivative of |w|^p, which is exact; farther offsets see a smooth
    integrand and use Gauss-Legendre on the four polynomial pieces of B3.
    """
    m = np.asarray(m, dtype=float)
    near = m <= 2
    out = np.empty_like(m)

    def antiderivative(w: np.ndarray) -> np.ndarray:
        return np.abs(w) ** (p + 4) / ((p + 1) * (p + 2) * (p + 3) * (p + 4))

    mn = m[near]
    out[near] = sum(
        (-1) ** j * special.comb(4, j) * antiderivative(mn + 2 - j) for j in range(5)
    )

    pieces = [gauss_legendre(k, k + 1, 16) for k in range(-2, 2)]
    z = np.concatenate([x for x, _ in pieces])
    wz = np.concatenate([w for _, w in pieces]) * _cubic_bspline(z)
    far = m[~near]
    out[~near] = np.abs(z[None, :] + far[:, None]) ** p @ wz
    return out


def hat_pairing_matrix(n: int, h: float, p: float) -> np.ndarray:
    """
    Exact Galerkin matrix of |x - u|^p between hat functions on a uniform grid.

    g^T B g is the double integral of the piecewise-linear interpolant of g
    against the kernel, so the only discretization error is interpolation,
    O(h^2) with a fixed sign for smooth g. B is Toeplitz with
    B[j, k] = h^(p+2) beta(|j - k|).

    Args:
        n: Number of nodes, at least 2
        h: Node spacing
        p: Kernel exponent in (-1, 0]

    Returns:
        Dense symmetric (n, n) matrix
    """
    if n < 2:
        raise PreconditionError(f"hat pairing needs at least 2 nodes, got {n}")
    if not -1 < p <= 0:
        raise PreconditionError(f"kernel exponent must lie in (-1, 0], got {p}")
    QUADRATURE_NODES.labels(operation="hat_pairing_matrix").observe(n)
    beta = _hat_kernel_moments(np.arange(n), p)
    offsets = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
    return h ** (p + 2) * beta[offsets]
