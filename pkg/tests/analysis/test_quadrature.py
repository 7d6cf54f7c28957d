import numpy as np
import pytest
from scipy import integrate

from analysis.quadrature import (
    gauss_legendre,
    hat_pairing_matrix,
    pairing_matrix,
    singular_weight_matrix,
    trapezoid_weights,
)
from common.errors import PreconditionError


def _kernel_integral(f, x, a, b, p):
    left, _ = integrate.quad(lambda u: f(u) * abs(x - u) ** p, a, x, limit=200) if x > a else (0.0, 0.0)
    right, _ = integrate.quad(lambda u: f(u) * abs(x - u) ** p, x, b, limit=200) if x < b else (0.0, 0.0)
    return left + right


class TestBasicRules:
    def test_gauss_legendre(self):
        nodes, weights = gauss_legendre(1.0, 3.0, 8)

        assert weights.sum() == pytest.approx(2.0)
        assert np.all((nodes > 1.0) & (nodes < 3.0))
        assert np.sum(weights * nodes**5) == pytest.approx((3.0**6 - 1.0) / 6)

    def test_trapezoid_weights(self):
        nodes = np.array([0.0, 0.1, 0.4, 1.0])

        np.testing.assert_allclose(trapezoid_weights(nodes), [0.05, 0.2, 0.45, 0.3])


class TestSingularWeightMatrix:
    @pytest.mark.parametrize("p", [0.0, -0.25, -0.48], ids=["smooth", "quarter", "near_half"])
    def test_exact_for_constants(self, p):
        nodes = np.linspace(0.0, 1.0, 41)
        weights = singular_weight_matrix(nodes, p)
        expected = (nodes ** (p + 1) + (1 - nodes) ** (p + 1)) / (p + 1)

        np.testing.assert_allclose(weights.sum(axis=1), expected, rtol=1e-10)

    @pytest.mark.parametrize("p", [-0.25, -0.48], ids=["quarter", "near_half"])
    def test_exact_for_linear_functions(self, p):
        nodes = np.sort(np.concatenate([[0.0, 1.0], np.random.default_rng(7).uniform(0, 1, 30)]))
        weights = singular_weight_matrix(nodes, p)
        approx = weights @ (1 - 2 * nodes)
        exact = np.array([_kernel_integral(lambda u: 1 - 2 * u, x, 0.0, 1.0, p) for x in nodes])

        np.testing.assert_allclose(approx, exact, rtol=1e-8, atol=1e-10)

    def test_converges_on_smooth_integrand(self):
        p = -0.48
        f = np.cos
        errors = []
        for n in (41, 81, 161):
            nodes = np.linspace(0.0, 1.0, n)
            approx = singular_weight_matrix(nodes, p)[n // 2] @ f(nodes)
            exact = _kernel_integral(f, nodes[n // 2], 0.0, 1.0, p)
            errors.append(abs(approx - exact))

        assert errors[1] < errors[0] / 3
        assert errors[2] < errors[1] / 3

    @pytest.mark.parametrize(
        "nodes,p",
        [
            (np.array([0.0, 0.5, 1.0]), -0.4),
            (np.linspace(0, 1, 10), -1.0),
            (np.linspace(0, 1, 10), 0.1),
            (np.array([0.0, 0.2, 0.2, 0.6, 1.0]), -0.4),
        ],
        ids=["too_few_nodes", "exponent_minus_one", "positive_exponent", "repeated_node"],
    )
    def test_preconditions(self, nodes, p):
        with pytest.raises(PreconditionError):
            singular_weight_matrix(nodes, p)


class TestPairingMatrix:
    def test_one_sided_forms_agree(self):
        p = -0.45
        nodes = np.linspace(-1.0, 1.0, 321)
        f = np.exp(-4 * nodes**2)
        g = (1 + nodes) * np.exp(-6 * (nodes - 0.2) ** 2)
        one_sided = trapezoid_weights(nodes)[:, None] * singular_weight_matrix(nodes, p)

        forward = f @ one_sided @ g
        backward = g @ one_sided @ f

        assert forward == pytest.approx(backward, rel=1e-3)
        assert f @ pairing_matrix(nodes, p) @ g == pytest.approx(0.5 * (forward + backward))

    def test_double_integral_of_one(self):
        p = -0.48
        length = 2.0
        nodes = np.linspace(0.0, length, 401)
        ones = np.ones_like(nodes)
        exact = 2 * length ** (p + 2) / ((p + 1) * (p + 2))

        assert ones @ pairing_matrix(nodes, p) @ ones == pytest.approx(exact, rel=1e-3)

    def test_positive_on_bumps(self):
        nodes = np.linspace(-1.0, 1.0, 201)
        g = np.exp(-10 * nodes**2)

        assert g @ pairing_matrix(nodes, -0.3) @ g > 0


class TestHatPairingMatrix:
    def test_constant_kernel(self):
        h = 0.1
        g = np.exp(-np.linspace(-2, 2, 41) ** 2)

        assert g @ hat_pairing_matrix(41, h, 0.0) @ g == pytest.approx((h * g.sum()) ** 2)

    def test_toeplitz_and_symmetric(self):
        matrix = hat_pairing_matrix(9, 0.25, -0.48)

        np.testing.assert_allclose(matrix, matrix.T)
        np.testing.assert_allclose(np.diag(matrix, 3), matrix[0, 3])

    @pytest.mark.parametrize("m", [6, 8, 12, 20], ids=["m6", "m8", "m12", "m20"])
    def test_far_entries_follow_moment_series(self, m):
        p = -0.48
        c2 = p * (p - 1) / 2
        c4 = c2 * (p - 2) * (p - 3) / 12
        expected = m**p * (1 + c2 / (3 * m**2) + c4 * 0.3 / m**4)

        assert hat_pairing_matrix(24, 1.0, p)[0, m] == pytest.approx(expected, rel=1e-5)

    def test_positive_definite(self):
        eigenvalues = np.linalg.eigvalsh(hat_pairing_matrix(64, 0.05, -0.48))

        assert eigenvalues.min() > 0

    def test_error_is_clean_second_order(self):
        p = -0.48

        def pairing(n):
            nodes = np.linspace(-3.0, 3.0, n)
            g = np.exp(-4 * nodes**2)
            return g @ hat_pairing_matrix(n, nodes[1] - nodes[0], p) @ g

        coarse, mid, fine = pairing(61), pairing(121), pairing(241)

        assert (coarse - mid) / (mid - fine) == pytest.approx(4.0, abs=0.5)

    def test_agrees_with_product_rule(self):
        p = -0.45
        nodes = np.linspace(-1.5, 1.5, 601)
        g = np.exp(-8 * nodes**2)

        galerkin = g @ hat_pairing_matrix(601, nodes[1] - nodes[0], p) @ g

        assert galerkin == pytest.approx(g @ pairing_matrix(nodes, p) @ g, rel=1e-3)

    @pytest.mark.parametrize(
        "n,p", [(1, -0.4), (10, -1.0), (10, 0.1)], ids=["one_node", "exponent_minus_one", "positive"]
    )
    def test_preconditions(self, n, p):
        with pytest.raises(PreconditionError):
            hat_pairing_matrix(n, 0.1, p)
