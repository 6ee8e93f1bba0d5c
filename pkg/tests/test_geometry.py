import sys
import unittest
from pathlib import Path

import numpy as np
import numpy.testing as npt

# Add the parent directory to the path
sys.path.append(str(Path(__file__).resolve().parent.parent))

from app.geometry.fractures import (CellClass, FractureKind, FractureSpec, classify_cells, cut_segment,
                                    discretize_fracture)
from app.mesh.triangulation import Domain, build_uniform_triangulation
from app.postprocess.diagnostics import PointLocator
from app.utils.errors import InvalidArgumentError

UNIT_SQUARE = Domain(0.0, 1.0, 0.0, 1.0)
TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _spec(start, end, kind=FractureKind.BLOCKING, permeability=1e-3):
    return FractureSpec(start=start, end=end, thickness=1e-3, permeability=permeability, kind=kind)


class TestFractureSpec(unittest.TestCase):
    """
    Test fracture validation.
    """

    def test_degenerate_segment(self):
        with self.assertRaises(InvalidArgumentError):
            _spec((0.5, 0.5), (0.5, 0.5))

    def test_nonpositive_data(self):
        with self.assertRaises(InvalidArgumentError):
            FractureSpec(start=(0, 0), end=(1, 0), thickness=0.0, permeability=1.0, kind=FractureKind.BLOCKING)
        with self.assertRaises(InvalidArgumentError):
            FractureSpec(start=(0, 0), end=(1, 0), thickness=1.0, permeability=-1.0, kind=FractureKind.BLOCKING)

    def test_kind_from_string(self):
        spec = FractureSpec(start=(0, 0), end=(1, 0), thickness=1.0, permeability=1.0, kind="conductive")
        self.assertIs(spec.kind, FractureKind.CONDUCTIVE)
        self.assertFalse(spec.is_blocking)


class TestDiscretizeFracture(unittest.TestCase):
    """
    Test the nodal level sets.
    """

    def setUp(self):
        self.mesh = build_uniform_triangulation(10, 10, UNIT_SQUARE)

    def test_horizontal_fracture(self):
        fracture = discretize_fracture(_spec((0.25, 0.5), (0.75, 0.5)), self.mesh)
        x, y = self.mesh.vertices[:, 0], self.mesh.vertices[:, 1]
        npt.assert_allclose(fracture.normal, [0.0, 1.0], atol=1e-15)
        npt.assert_allclose(fracture.phi, y - 0.5, atol=1e-9)
        npt.assert_allclose(fracture.psi[0], 0.25 - x, atol=1e-9)
        npt.assert_allclose(fracture.psi[1], x - 0.75, atol=1e-9)

    def test_vertical_fracture(self):
        fracture = discretize_fracture(_spec((0.5, 0.25), (0.5, 0.75)), self.mesh)
        npt.assert_allclose(np.abs(fracture.normal), [1.0, 0.0], atol=1e-15)

    def test_rotated_fracture(self):
        fracture = discretize_fracture(_spec((0.1, 0.1), (0.9, 0.9)), self.mesh)
        self.assertAlmostEqual(float(fracture.normal @ fracture.tangent), 0.0, places=15)
        self.assertAlmostEqual(float(np.linalg.norm(fracture.normal)), 1.0, places=15)
        npt.assert_allclose(fracture.normal_projector() + fracture.tangential_projector(), np.eye(2))

    def test_normal_independent_of_endpoint_order(self):
        forward = discretize_fracture(_spec((0.2, 0.7), (0.8, 0.3)), self.mesh)
        backward = discretize_fracture(_spec((0.8, 0.3), (0.2, 0.7)), self.mesh)
        npt.assert_allclose(forward.normal, backward.normal)
        npt.assert_allclose(forward.phi, backward.phi)


class TestCutSegment(unittest.TestCase):
    """
    Test the per-cell intersection with the zero set.
    """

    def test_full_cut(self):
        phi = TRIANGLE[:, 1] - 0.25
        segment = cut_segment(TRIANGLE, phi)
        self.assertIsNotNone(segment)
        self.assertAlmostEqual(segment.length, 0.75, places=14)
        endpoints = sorted(map(tuple, segment.points))
        npt.assert_allclose(endpoints, [(0.0, 0.25), (0.75, 0.25)], atol=1e-14)

    def test_clipped_cut(self):
        phi = TRIANGLE[:, 1] - 0.25
        psi = TRIANGLE[:, 0] - 0.5
        segment = cut_segment(TRIANGLE, phi, [psi])
        self.assertAlmostEqual(segment.length, 0.5, places=14)
        endpoints = sorted(map(tuple, segment.points))
        npt.assert_allclose(endpoints, [(0.0, 0.25), (0.5, 0.25)], atol=1e-14)

    def test_no_crossing(self):
        self.assertIsNone(cut_segment(TRIANGLE, TRIANGLE[:, 1] - 2.0))

    def test_clipped_away(self):
        phi = TRIANGLE[:, 1] - 0.25
        self.assertIsNone(cut_segment(TRIANGLE, phi, [1.0 - TRIANGLE[:, 0] + 1.0]))


class TestClassifyCells(unittest.TestCase):
    """
    Test the regular / blocking / conductive split.
    """

    def test_crossing_blocking_fractures(self):
        mesh = build_uniform_triangulation(9, 9, UNIT_SQUARE)
        specs = [_spec((0.25, 0.5), (0.75, 0.5)), _spec((0.5, 0.25), (0.5, 0.75))]
        classification = classify_cells(mesh, [discretize_fracture(s, mesh, 1.0) for s in specs])
        cell, _ = PointLocator(mesh).locate(np.array([0.5, 0.49]))
        self.assertEqual(classification.class_of[cell], CellClass.BLOCKING)
        self.assertEqual(sorted(s.fracture for s in classification.cuts_of(cell)), [0, 1])

    def test_mixed_kinds_drop_conductive_cut(self):
        mesh = build_uniform_triangulation(9, 9, UNIT_SQUARE)
        specs = [_spec((0.25, 0.5), (0.75, 0.5)),
                 _spec((0.5, 0.25), (0.5, 0.75), kind=FractureKind.CONDUCTIVE, permeability=1e3)]
        classification = classify_cells(mesh, [discretize_fracture(s, mesh, 1.0) for s in specs])
        cell, _ = PointLocator(mesh).locate(np.array([0.5, 0.49]))
        self.assertEqual(classification.class_of[cell], CellClass.BLOCKING)
        self.assertEqual([s.fracture for s in classification.cuts_of(cell)], [0])
        self.assertGreater(classification.cells_in(CellClass.CONDUCTIVE).size, 0)

    def test_class_invariants(self):
        mesh = build_uniform_triangulation(12, 12, UNIT_SQUARE)
        specs = [_spec((0.1, 0.33), (0.9, 0.71)),
                 _spec((0.2, 0.8), (0.7, 0.1), kind=FractureKind.CONDUCTIVE, permeability=1e3)]
        classification = classify_cells(mesh, [discretize_fracture(s, mesh) for s in specs])
        far, _ = PointLocator(mesh).locate(np.array([0.95, 0.05]))
        self.assertEqual(classification.class_of[far], CellClass.REGULAR)
        self.assertEqual(classification.cuts_of(far), [])
        self.assertEqual(sum(classification.counts().values()), mesh.num_cells)
        for cell in range(mesh.num_cells):
            kinds = [specs[s.fracture].kind for s in classification.cuts_of(cell)]
            cell_class = classification.class_of[cell]
            if cell_class == CellClass.REGULAR:
                self.assertEqual(kinds, [])
            elif cell_class == CellClass.BLOCKING:
                self.assertIn(FractureKind.BLOCKING, kinds)
                self.assertNotIn(FractureKind.CONDUCTIVE, kinds)
            else:
                self.assertTrue(kinds and all(k is FractureKind.CONDUCTIVE for k in kinds))

    def test_cut_lengths_tile_fracture(self):
        mesh = build_uniform_triangulation(10, 10, UNIT_SQUARE)
        for spec, expected in ((_spec((0.13, 0.53), (0.87, 0.61)), None),
                               (_spec((-0.5, 0.53), (1.5, 0.53)), 1.0)):
            fracture = discretize_fracture(spec, mesh)
            classification = classify_cells(mesh, [fracture])
            total = sum(s.length for cuts in classification.cuts.values() for s in cuts)
            npt.assert_allclose(total, expected or spec.length, rtol=1e-10)

    def test_cut_endpoints_on_fracture(self):
        mesh = build_uniform_triangulation(10, 10, UNIT_SQUARE)
        spec = _spec((0.13, 0.21), (0.77, 0.86))
        fracture = discretize_fracture(spec, mesh, 1.0)
        classification = classify_cells(mesh, [fracture])
        a, b = np.asarray(spec.start), np.asarray(spec.end)
        for cuts in classification.cuts.values():
            for segment in cuts:
                for point in segment.points:
                    self.assertLessEqual(abs((point - a) @ fracture.normal), 1e-12)
                    self.assertLessEqual((a - point) @ fracture.tangent, 1e-12)
                    self.assertLessEqual((point - b) @ fracture.tangent, 1e-12)

    def test_endpoint_order_does_not_change_classes(self):
        mesh = build_uniform_triangulation(10, 10, UNIT_SQUARE)
        forward = classify_cells(mesh, [discretize_fracture(_spec((0.15, 0.62), (0.85, 0.44)), mesh)])
        backward = classify_cells(mesh, [discretize_fracture(_spec((0.85, 0.44), (0.15, 0.62)), mesh)])
        npt.assert_array_equal(forward.class_of, backward.class_of)
        self.assertEqual(sorted(forward.cuts), sorted(backward.cuts))

    def test_edge_aligned_fracture_stabilizes_touching_cells(self):
        mesh = build_uniform_triangulation(10, 10, UNIT_SQUARE)
        spec = _spec((0.25, 0.5), (0.75, 0.5), kind=FractureKind.CONDUCTIVE, permeability=1e3)
        fracture = discretize_fracture(spec, mesh, 1.0)
        on_line = mesh.vertices[fracture.on_fracture]
        npt.assert_allclose(on_line[:, 1], 0.5)
        npt.assert_allclose(np.sort(on_line[:, 0]), [0.3, 0.4, 0.5, 0.6, 0.7], atol=1e-12)

        classification = classify_cells(mesh, [fracture])
        touching = np.flatnonzero(fracture.on_fracture[mesh.cells].any(axis=1))
        npt.assert_array_equal(classification.stabilization_class[touching], CellClass.CONDUCTIVE)
        # cells on the uncut side of the edge keep their class and carry no segment
        uncut = touching[classification.class_of[touching] == CellClass.REGULAR]
        self.assertGreater(uncut.size, 0)
        for cell in uncut:
            self.assertEqual(classification.cuts_of(cell), [])
        total = sum(s.length for cuts in classification.cuts.values() for s in cuts)
        npt.assert_allclose(total, 0.5, rtol=1e-10)
        self.assertTrue(set(touching) <= set(classification.fracture_band()))

    def test_stabilization_class_defaults_to_cut_class(self):
        mesh = build_uniform_triangulation(10, 10, UNIT_SQUARE)
        classification = classify_cells(mesh, [discretize_fracture(_spec((0.13, 0.53), (0.87, 0.61)), mesh)])
        far, _ = PointLocator(mesh).locate(np.array([0.95, 0.05]))
        self.assertEqual(classification.stabilization_class[far], CellClass.REGULAR)
        cut = classification.fractured_cells()
        npt.assert_array_equal(classification.stabilization_class[cut], classification.class_of[cut])


if __name__ == "__main__":
    unittest.main()
