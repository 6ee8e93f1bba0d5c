"""
Nodal Lagrange bases on the reference triangle and the reference interval,
and the affine map between reference and physical triangles.

Cell bases span P_k on the triangle (k = 0..3; degree 3 is only used by the
pressure postprocessing of k = 2 runs). Facet bases span P_k on [0, 1].
Both are built from monomials through the inverse Vandermonde matrix of an
equispaced node lattice.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np

from app.utils.errors import InvalidArgumentError

MAX_CELL_DEGREE = 3
SCHEME_DEGREES = (0, 1, 2)

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _check_degree(degree: int, max_degree: int) -> int:
    if not isinstance(degree, (int, np.integer)) or degree < 0 or degree > max_degree:
        raise InvalidArgumentError(
            f"Unsupported polynomial degree {degree}; supported degrees are 0..{max_degree}",
            {"degree": degree},
        )
    return int(degree)


def cell_dimension(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def _triangle_exponents(degree: int) -> np.ndarray:
    return np.array([(a, d - a) for d in range(degree + 1) for a in range(d, -1, -1)], dtype=int)


def _triangle_nodes(degree: int) -> np.ndarray:
    if degree == 0:
        return np.array([[1.0 / 3.0, 1.0 / 3.0]])
    # vertices first, so the P1 basis is the usual hat basis
    nodes = [(i / degree, j / degree) for j in range(degree + 1) for i in range(degree + 1 - j)]
    nodes.sort(key=lambda xy: (0 if _is_vertex(xy) else 1, _vertex_rank(xy)))
    return np.array(nodes)


def _is_vertex(xy: Tuple[float, float]) -> bool:
    return any(np.allclose(xy, v) for v in REFERENCE_VERTICES)


def _vertex_rank(xy: Tuple[float, float]) -> int:
    for rank, v in enumerate(REFERENCE_VERTICES):
        if np.allclose(xy, v):
            return rank
    return 3


@dataclass(frozen=True)
class CellBasis:
    """
    Nodal P_k basis on the reference triangle.

    Attributes:
    -----------
    degree : int
        Polynomial degree k.
    nodes : np.ndarray
        (dim, 2) interpolation nodes.
    """
    degree: int
    nodes: np.ndarray = field(repr=False)
    exponents: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.nodes.shape[0]

    def _monomials(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = points[:, 0:1]
        y = points[:, 1:2]
        a = self.exponents[:, 0][None, :]
        b = self.exponents[:, 1][None, :]
        values = x ** a * y ** b
        dx = np.where(a > 0, a * x ** np.maximum(a - 1, 0), 0.0) * y ** b
        dy = np.where(b > 0, b * y ** np.maximum(b - 1, 0), 0.0) * x ** a
        return values, np.stack([dx, dy], axis=-1)

    def evaluate(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate all basis functions and reference gradients.

        Parameters:
        -----------
        points : np.ndarray
            (nq, 2) reference coordinates (a single point of shape (2,) is accepted).

        Returns:
        --------
        Tuple[np.ndarray, np.ndarray]
            values (nq, dim) and gradients (nq, dim, 2).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        monomials, monomial_grads = self._monomials(points)
        values = monomials @ self.coefficients
        grads = np.einsum("qmc,mi->qic", monomial_grads, self.coefficients)
        return values, grads


@dataclass(frozen=True)
class FacetBasis:
    """
    Nodal P_k basis on the reference interval [0, 1].
    """
    degree: int
    nodes: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.degree + 1

    def evaluate(self, s: np.ndarray) -> np.ndarray:
        """Values (nq, k+1) at parameters ``s`` in [0, 1]."""
        s = np.asarray(s, dtype=float).reshape(-1, 1)
        powers = s ** np.arange(self.degree + 1)[None, :]
        return powers @ self.coefficients


@lru_cache(maxsize=None)
def cell_basis(degree: int) -> CellBasis:
    degree = _check_degree(degree, MAX_CELL_DEGREE)
    nodes = _triangle_nodes(degree)
    exponents = _triangle_exponents(degree)
    vandermonde = nodes[:, 0:1] ** exponents[:, 0][None, :] * nodes[:, 1:2] ** exponents[:, 1][None, :]
    coefficients = np.linalg.inv(vandermonde)
    return CellBasis(degree=degree, nodes=nodes, exponents=exponents, coefficients=coefficients)


@lru_cache(maxsize=None)
def facet_basis(degree: int) -> FacetBasis:
    degree = _check_degree(degree, MAX_CELL_DEGREE)
    nodes = np.array([0.5]) if degree == 0 else np.linspace(0.0, 1.0, degree + 1)
    vandermonde = nodes[:, None] ** np.arange(degree + 1)[None, :]
    coefficients = np.linalg.inv(vandermonde)
    return FacetBasis(degree=degree, nodes=nodes, coefficients=coefficients)


def eval_cell_basis(degree: int, point: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Values and reference gradients of the P_k cell basis at one reference point.

    Returns:
    --------
    Tuple[np.ndarray, np.ndarray]
        values (dim,) and gradients (dim, 2).
    """
    values, grads = cell_basis(degree).evaluate(np.asarray(point, dtype=float).reshape(1, 2))
    return values[0], grads[0]


@dataclass(frozen=True)
class AffineMap:
    """
    x = origin + jacobian @ xi for one physical triangle.
    """
    origin: np.ndarray
    jacobian: np.ndarray
    inverse: np.ndarray
    det: float

    @classmethod
    def from_vertices(cls, vertices: np.ndarray) -> "AffineMap":
        vertices = np.asarray(vertices, dtype=float)
        jacobian = np.column_stack([vertices[1] - vertices[0], vertices[2] - vertices[0]])
        det = float(np.linalg.det(jacobian))
        if det == 0.0:
            raise InvalidArgumentError("Degenerate triangle (zero area)", {"vertices": vertices.tolist()})
        return cls(origin=vertices[0], jacobian=jacobian, inverse=np.linalg.inv(jacobian), det=det)

    def to_physical(self, xi: np.ndarray) -> np.ndarray:
        return self.origin + np.atleast_2d(xi) @ self.jacobian.T

    def to_reference(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.origin) @ self.inverse.T

    def physical_gradients(self, reference_gradients: np.ndarray) -> np.ndarray:
        """Map (..., 2) reference gradients with the inverse-transpose Jacobian."""
        return reference_gradients @ self.inverse
