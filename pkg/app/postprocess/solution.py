"""
Container for a computed HDG solution.
"""
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from app.fem.basis import cell_basis, cell_dimension
from app.fem.quadrature import triangle_quadrature
from app.utils.errors import InvalidArgumentError

if TYPE_CHECKING:
    from app.geometry.fractures import CellClassification
    from app.mesh.triangulation import Mesh
    from app.solver.assembly import CondensedSystem

_CENTROID = np.array([[1.0 / 3.0, 1.0 / 3.0]])


@dataclass(eq=False)
class HDGSolution:
    """
    Coefficients of (u_h, ũ_h, p_h, p̂_h) and the postprocessed p*_h.

    Attributes:
    -----------
    system : CondensedSystem
        The system the solution was recovered from (mesh, classification, data).
    u, u_tilde : np.ndarray
        (nc, 2 * dim) cell coefficients, x-components first.
    p : np.ndarray
        (nc, dim) cell coefficients.
    p_hat : np.ndarray
        (nf, k + 1) facet coefficients in the global facet orientation.
    p_star : Optional[np.ndarray]
        (nc, dim_{k+1}) coefficients of the postprocessed pressure, once computed.
    """
    system: "CondensedSystem"
    u: np.ndarray = field(repr=False)
    u_tilde: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    p_hat: np.ndarray = field(repr=False)
    p_star: Optional[np.ndarray] = field(default=None, repr=False)
    scenario_name: str = ""

    def __post_init__(self):
        n = cell_dimension(self.degree)
        num_cells = self.mesh.num_cells
        if self.u.shape != (num_cells, 2 * n) or self.u_tilde.shape != (num_cells, 2 * n):
            raise InvalidArgumentError(f"Velocity coefficients must have shape {(num_cells, 2 * n)}")
        if self.p.shape != (num_cells, n):
            raise InvalidArgumentError(f"Pressure coefficients must have shape {(num_cells, n)}")
        if self.p_hat.shape != (self.mesh.num_facets, self.degree + 1):
            raise InvalidArgumentError(f"Trace coefficients must have shape {(self.mesh.num_facets, self.degree + 1)}")

    @property
    def mesh(self) -> "Mesh":
        return self.system.mesh

    @property
    def classification(self) -> "CellClassification":
        return self.system.classification

    @property
    def degree(self) -> int:
        return self.system.degree

    @property
    def cell_dim(self) -> int:
        return cell_dimension(self.degree)

    @property
    def has_p_star(self) -> bool:
        return self.p_star is not None

    def cell_vector(self, cell: int) -> np.ndarray:
        """(u, ũ, p) of one cell as the local solver orders them."""
        return np.concatenate([self.u[cell], self.u_tilde[cell], self.p[cell]])

    def local_trace(self, cell: int) -> np.ndarray:
        """p̂ on the three facets of a cell, in facet DOF order."""
        return self.p_hat[self.mesh.cell_facets[cell]].ravel()

    def coefficient_norm(self) -> float:
        """Euclidean norm of all coefficients (u, ũ, p, p̂)."""
        return float(np.sqrt(sum(np.sum(a * a) for a in (self.u, self.u_tilde, self.p, self.p_hat))))

    def centroid_velocity(self) -> np.ndarray:
        """(nc, 2) values of u_h at the cell centroids."""
        values, _ = cell_basis(self.degree).evaluate(_CENTROID)
        n = self.cell_dim
        return np.column_stack([self.u[:, :n] @ values[0], self.u[:, n:] @ values[0]])

    def cell_mean_pressure(self) -> np.ndarray:
        """(nc,) cell means of p_h."""
        return self._cell_means(self.p, self.degree)

    def cell_mean_p_star(self) -> np.ndarray:
        """(nc,) cell means of p*_h."""
        if self.p_star is None:
            raise InvalidArgumentError("Postprocessed pressure has not been computed")
        return self._cell_means(self.p_star, self.degree + 1)

    @staticmethod
    def _cell_means(coefficients: np.ndarray, degree: int) -> np.ndarray:
        rule = triangle_quadrature(degree)
        values, _ = cell_basis(degree).evaluate(rule.points)
        # reference area 1/2, the Jacobian cancels in the mean
        return coefficients @ (rule.weights @ values) * 2.0
