import math
import sys
import unittest
from pathlib import Path

import numpy as np
import numpy.testing as npt

# Add the parent directory to the path
sys.path.append(str(Path(__file__).resolve().parent.parent))

from app.fem.basis import AffineMap, cell_basis, cell_dimension, eval_cell_basis, facet_basis
from app.fem.quadrature import MAX_QUADRATURE_ORDER, segment_quadrature, triangle_quadrature
from app.utils.errors import InvalidArgumentError


def _triangle_monomial_integral(a: int, b: int) -> float:
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


class TestQuadrature(unittest.TestCase):
    """
    Test exactness of the reference rules.
    """

    def test_triangle_rules_exact(self):
        for order in range(MAX_QUADRATURE_ORDER + 1):
            rule = triangle_quadrature(order)
            self.assertTrue(np.all(rule.weights > 0.0))
            x, y = rule.points[:, 0], rule.points[:, 1]
            for a in range(order + 1):
                for b in range(order + 1 - a):
                    value = rule.weights @ (x ** a * y ** b)
                    self.assertLess(abs(value - _triangle_monomial_integral(a, b)), 1e-14,
                                    f"order {order}, monomial x^{a} y^{b}")

    def test_segment_rules_exact(self):
        for order in range(MAX_QUADRATURE_ORDER + 1):
            rule = segment_quadrature(order)
            s = rule.points[:, 0]
            for degree in range(order + 1):
                self.assertLess(abs(rule.weights @ s ** degree - 1.0 / (degree + 1)), 1e-14)

    def test_centroid_rule(self):
        rule = triangle_quadrature(1)
        self.assertEqual(rule.size, 1)
        npt.assert_allclose(rule.points, [[1.0 / 3.0, 1.0 / 3.0]])
        npt.assert_allclose(rule.weights, [0.5])

    def test_unsupported_order(self):
        for order in (-1, MAX_QUADRATURE_ORDER + 1):
            with self.assertRaises(InvalidArgumentError):
                triangle_quadrature(order)
            with self.assertRaises(InvalidArgumentError):
                segment_quadrature(order)


class TestBasis(unittest.TestCase):
    """
    Test the nodal Lagrange bases.
    """

    def test_p0(self):
        values, grads = eval_cell_basis(0, np.array([0.2, 0.3]))
        npt.assert_allclose(values, [1.0])
        npt.assert_allclose(grads, [[0.0, 0.0]])

    def test_p1_vertices(self):
        for i, vertex in enumerate(([0.0, 0.0], [1.0, 0.0], [0.0, 1.0])):
            values, _ = eval_cell_basis(1, np.array(vertex))
            expected = np.zeros(3)
            expected[i] = 1.0
            npt.assert_allclose(values, expected, atol=1e-14)

    def test_nodal_and_partition_of_unity(self):
        rule = triangle_quadrature(4)
        for degree in range(4):
            basis = cell_basis(degree)
            self.assertEqual(basis.dim, cell_dimension(degree))
            values, grads = basis.evaluate(basis.nodes)
            npt.assert_allclose(values, np.eye(basis.dim), atol=1e-12)
            values, grads = basis.evaluate(rule.points)
            npt.assert_allclose(values.sum(axis=1), 1.0, atol=1e-12)
            npt.assert_allclose(grads.sum(axis=1), 0.0, atol=1e-10)

    def test_facet_basis(self):
        for degree in range(3):
            basis = facet_basis(degree)
            s = np.linspace(0.0, 1.0, 7)
            npt.assert_allclose(basis.evaluate(s).sum(axis=1), 1.0, atol=1e-13)
            npt.assert_allclose(basis.evaluate(basis.nodes), np.eye(degree + 1), atol=1e-13)

    def test_gradients_match_finite_differences(self):
        basis = cell_basis(2)
        point = np.array([[0.21, 0.37]])
        _, grads = basis.evaluate(point)
        step = 1e-6
        for c in range(2):
            shift = np.zeros((1, 2))
            shift[0, c] = step
            plus, _ = basis.evaluate(point + shift)
            minus, _ = basis.evaluate(point - shift)
            npt.assert_allclose(grads[0, :, c], (plus[0] - minus[0]) / (2 * step), atol=1e-7)

    def test_unsupported_degree(self):
        with self.assertRaises(InvalidArgumentError):
            cell_basis(4)


class TestAffineMap(unittest.TestCase):
    """
    Test the reference-to-physical map.
    """

    def setUp(self):
        self.vertices = np.array([[0.2, 0.1], [0.7, 0.3], [0.4, 0.9]])
        self.amap = AffineMap.from_vertices(self.vertices)

    def test_vertices(self):
        npt.assert_allclose(self.amap.to_physical(np.array([[0, 0], [1, 0], [0, 1]])), self.vertices)

    def test_round_trip(self):
        xi = np.array([[0.1, 0.2], [0.5, 0.25]])
        npt.assert_allclose(self.amap.to_reference(self.amap.to_physical(xi)), xi, atol=1e-14)

    def test_physical_gradient_of_linear_function(self):
        # f(x, y) = 3x - 2y interpolated with P1 has gradient (3, -2)
        nodal = 3.0 * self.vertices[:, 0] - 2.0 * self.vertices[:, 1]
        _, grads = eval_cell_basis(1, np.array([0.3, 0.3]))
        npt.assert_allclose(nodal @ self.amap.physical_gradients(grads), [3.0, -2.0], atol=1e-13)

    def test_degenerate_triangle(self):
        with self.assertRaises(InvalidArgumentError):
            AffineMap.from_vertices(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))


if __name__ == "__main__":
    unittest.main()
