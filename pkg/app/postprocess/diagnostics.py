"""
Pressure postprocessing, line sampling and diagnostic functionals.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np
from loguru import logger

from app.config.settings import POINT_LOCATION_TOLERANCE
from app.fem.basis import AffineMap, cell_basis
from app.fem.quadrature import MAX_QUADRATURE_ORDER, triangle_quadrature
from app.mesh.triangulation import Mesh
from app.postprocess.solution import HDGSolution
from app.utils.errors import AssemblyError, InvalidArgumentError

ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def _postprocess_tables(degree: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rule = triangle_quadrature(2 * degree + 2)
    phi_k, _ = cell_basis(degree).evaluate(rule.points)
    phi_star, dphi_star = cell_basis(degree + 1).evaluate(rule.points)
    return rule.weights, phi_k, phi_star, dphi_star


def postprocess_pressure(solution: HDGSolution) -> HDGSolution:
    """
    Compute the P_{k+1} pressure p*_h cell by cell.

    On each cell, (grad p*, grad q) = -(K_m⁻¹ ũ_h, grad q) for all q in P_{k+1}
    and (p*, 1) = (p_h, 1); the mean condition is imposed with a Lagrange multiplier.

    Parameters:
    -----------
    solution : HDGSolution
        Solution with recovered cell unknowns.

    Returns:
    --------
    HDGSolution
        The same object with ``p_star`` filled.
    """
    mesh = solution.mesh
    k = solution.degree
    n = solution.cell_dim
    weights, phi_k, phi_star, dphi_star = _postprocess_tables(k)
    n_star = phi_star.shape[1]
    permeability = solution.system.problem.permeability

    p_star = np.zeros((mesh.num_cells, n_star))
    saddle = np.zeros((n_star + 1, n_star + 1))
    rhs = np.zeros(n_star + 1)
    for cell in range(mesh.num_cells):
        amap = AffineMap.from_vertices(mesh.vertices[mesh.cells[cell]])
        w = amap.det * weights
        grads = amap.physical_gradients(dphi_star)
        u_tilde = np.column_stack([phi_k @ solution.u_tilde[cell, :n], phi_k @ solution.u_tilde[cell, n:]])

        saddle[:n_star, :n_star] = np.einsum("q,qic,qjc->ij", w, grads, grads)
        means = w @ phi_star
        saddle[:n_star, n_star] = means
        saddle[n_star, :n_star] = means
        saddle[n_star, n_star] = 0.0
        rhs[:n_star] = -np.einsum("q,qc,qic->i", w, u_tilde, grads) / permeability[cell]
        rhs[n_star] = w @ (phi_k @ solution.p[cell])
        try:
            p_star[cell] = np.linalg.solve(saddle, rhs)[:n_star]
        except np.linalg.LinAlgError as exc:
            raise AssemblyError("Singular postprocessing system", cell) from exc

    solution.p_star = p_star
    logger.debug(f"Postprocessed pressure to degree {k + 1} on {mesh.num_cells} cells")
    return solution


class PointLocator:
    """
    Barycentric point location over all cells of a mesh.

    Ties on shared edges and vertices go to the lowest cell id.
    """

    def __init__(self, mesh: Mesh, tolerance: float = POINT_LOCATION_TOLERANCE):
        self.mesh = mesh
        self.tolerance = tolerance
        vertices = mesh.vertices[mesh.cells]
        self.origins = vertices[:, 0, :]
        jacobians = np.stack([vertices[:, 1] - vertices[:, 0], vertices[:, 2] - vertices[:, 0]], axis=-1)
        self.inverses = np.linalg.inv(jacobians)

    def reference_coordinates(self, point: np.ndarray) -> np.ndarray:
        """(nc, 2) reference coordinates of ``point`` in every cell."""
        return np.einsum("cij,cj->ci", self.inverses, np.asarray(point, dtype=float) - self.origins)

    def locate(self, point: np.ndarray) -> Tuple[int, np.ndarray]:
        """
        Find the containing cell.

        Returns:
        --------
        Tuple[int, np.ndarray]
            Cell id and reference coordinates of the point in that cell.
        """
        xi = self.reference_coordinates(point)
        barycentric = np.column_stack([1.0 - xi.sum(axis=1), xi])
        inside = np.flatnonzero(barycentric.min(axis=1) >= -self.tolerance)
        if inside.size == 0:
            raise InvalidArgumentError("Point is outside the mesh", {"point": tuple(np.asarray(point).tolist())})
        cell = int(inside[0])
        return cell, xi[cell]


@dataclass(frozen=True)
class LineSample:
    """
    Samples of p*_h along a segment.

    Attributes:
    -----------
    s : np.ndarray
        Arc length from the start point.
    points : np.ndarray
        (n, 2) sample coordinates.
    values : np.ndarray
        p*_h at the samples.
    cells : np.ndarray
        Cell used for each sample.
    """
    s: np.ndarray
    points: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.s.shape[0])

    def as_pairs(self):
        return list(zip(self.s.tolist(), self.values.tolist()))


def sample_line(solution: HDGSolution, start, end, samples: int) -> LineSample:
    """
    Sample p*_h at ``samples`` equispaced points of the segment [start, end].

    Parameters:
    -----------
    solution : HDGSolution
        The solution; p*_h is computed if missing.
    start, end : array-like
        Segment endpoints inside the closed domain.
    samples : int
        Number of samples, at least 2.

    Returns:
    --------
    LineSample
        Arc lengths, coordinates, values and the cell used for each sample.
    """
    if samples < 2:
        raise InvalidArgumentError("A line cut needs at least 2 samples", {"samples": samples})
    if solution.p_star is None:
        postprocess_pressure(solution)
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    t = np.linspace(0.0, 1.0, samples)
    points = start[None, :] + t[:, None] * (end - start)[None, :]
    locator = PointLocator(solution.mesh)
    basis = cell_basis(solution.degree + 1)

    cells = np.empty(samples, dtype=int)
    values = np.empty(samples)
    for i, point in enumerate(points):
        cell, xi = locator.locate(point)
        phi, _ = basis.evaluate(xi)
        cells[i] = cell
        values[i] = phi[0] @ solution.p_star[cell]
    return LineSample(s=t * float(np.linalg.norm(end - start)), points=points, values=values, cells=cells)


def flux_moments(solution: HDGSolution) -> np.ndarray:
    """(nc, 3, k + 1) moments <û·n, μ_l> on each local facet of each cell."""
    system = solution.system
    m = system.facet_dim
    moments = np.empty((solution.mesh.num_cells, 3, m))
    for cell, local in enumerate(system.locals):
        moments[cell] = local.flux_moments(solution.cell_vector(cell), solution.local_trace(cell)).reshape(3, m)
    return moments


def source_integrals(solution: HDGSolution) -> np.ndarray:
    """(nc,) ∫_K f."""
    return np.array([local.load.sum() for local in solution.system.locals])


def conservation_residuals(solution: HDGSolution) -> np.ndarray:
    """
    Per-cell balance r_K = ∫_{∂K} û_h·n ds - ∫_K f dx.

    The facet and cell bases are partitions of unity, so the integrals are sums of moments.
    """
    return flux_moments(solution).sum(axis=(1, 2)) - source_integrals(solution)


def energy_norm(solution: HDGSolution) -> float:
    """E(u_h, ũ_h) summed over cells."""
    return float(sum(local.energy(solution.cell_vector(cell)) for cell, local in enumerate(solution.system.locals)))


def energy_residual(solution: HDGSolution) -> float:
    """
    Signed defect of the discrete energy identity:

        E(u_h, ũ_h) + <α (p_h - p̂_h), p_h - p̂_h> - (f, p_h) + Σ_{F ⊂ ∂Ω} <û_h·n, p̂_h>_F.
    """
    mesh = solution.mesh
    system = solution.system
    m = system.facet_dim
    moments = flux_moments(solution)
    total = 0.0
    for cell, local in enumerate(system.locals):
        x = solution.cell_vector(cell)
        trace = solution.local_trace(cell)
        _, _, p = local.split(x)
        total += local.energy(x) + local.stabilization_energy(x, trace) - local.load @ p
        for j, facet in enumerate(mesh.cell_facets[cell]):
            if mesh.facet_cells[facet, 1] < 0:
                total += moments[cell, j] @ trace[j * m:(j + 1) * m]
    return float(total)


def boundary_fluxes(solution: HDGSolution) -> Dict[str, float]:
    """Outward flux ∫ û_h·n over each boundary tag."""
    mesh = solution.mesh
    moments = flux_moments(solution)
    fluxes = {tag: 0.0 for tag in sorted(set(mesh.boundary_tags.values()))}
    for facet in mesh.boundary_facets():
        cell = int(mesh.facet_cells[facet, 0])
        local = int(np.flatnonzero(mesh.cell_facets[cell] == facet)[0])
        fluxes[mesh.boundary_tags[int(facet)]] += float(moments[cell, local].sum())
    return fluxes


def boundary_flux(solution: HDGSolution, tag: str) -> float:
    """
    Outward flux ∫ û_h·n ds over the boundary facets tagged ``tag``.

    Raises:
    -------
    InvalidArgumentError
        If no boundary facet carries the tag.
    """
    fluxes = boundary_fluxes(solution)
    if tag not in fluxes:
        raise InvalidArgumentError(f"Unknown boundary tag '{tag}'", {"tags": sorted(fluxes)})
    return fluxes[tag]


def global_balance(solution: HDGSolution) -> float:
    """Σ r_K - (Σ boundary fluxes - ∫_Ω f)."""
    residuals = conservation_residuals(solution)
    return float(residuals.sum() - (sum(boundary_fluxes(solution).values()) - source_integrals(solution).sum()))


def _error_rule(degree: int):
    return triangle_quadrature(min(2 * degree + 4, MAX_QUADRATURE_ORDER))


def l2_error(solution: HDGSolution, exact: ScalarField, field_name: str = "p") -> float:
    """
    ‖p - p_h‖ (field_name="p") or ‖p - p*_h‖ (field_name="p_star") over the mesh.
    """
    if field_name == "p":
        coefficients, degree = solution.p, solution.degree
    elif field_name == "p_star":
        if solution.p_star is None:
            postprocess_pressure(solution)
        coefficients, degree = solution.p_star, solution.degree + 1
    else:
        raise InvalidArgumentError(f"Unknown scalar field '{field_name}'")
    rule = _error_rule(degree)
    phi, _ = cell_basis(degree).evaluate(rule.points)
    mesh = solution.mesh
    total = 0.0
    for cell in range(mesh.num_cells):
        amap = AffineMap.from_vertices(mesh.vertices[mesh.cells[cell]])
        diff = exact(amap.to_physical(rule.points)) - phi @ coefficients[cell]
        total += amap.det * rule.weights @ (diff * diff)
    return float(np.sqrt(total))


def l2_error_velocity(solution: HDGSolution, exact: VectorField, field_name: str = "u") -> float:
    """‖u - u_h‖ (field_name="u") or ‖u - ũ_h‖ (field_name="u_tilde")."""
    if field_name not in ("u", "u_tilde"):
        raise InvalidArgumentError(f"Unknown vector field '{field_name}'")
    coefficients = getattr(solution, field_name)
    degree = solution.degree
    n = solution.cell_dim
    rule = _error_rule(degree)
    phi, _ = cell_basis(degree).evaluate(rule.points)
    mesh = solution.mesh
    total = 0.0
    for cell in range(mesh.num_cells):
        amap = AffineMap.from_vertices(mesh.vertices[mesh.cells[cell]])
        approx = np.column_stack([phi @ coefficients[cell, :n], phi @ coefficients[cell, n:]])
        diff = exact(amap.to_physical(rule.points)) - approx
        total += amap.det * rule.weights @ np.sum(diff * diff, axis=1)
    return float(np.sqrt(total))


def source_l2_norm(solution: HDGSolution) -> float:
    rule = _error_rule(solution.degree)
    source = solution.system.problem.source
    mesh = solution.mesh
    total = 0.0
    for cell in range(mesh.num_cells):
        amap = AffineMap.from_vertices(mesh.vertices[mesh.cells[cell]])
        values = source(amap.to_physical(rule.points))
        total += amap.det * rule.weights @ (values * values)
    return float(np.sqrt(total))


def data_scale(solution: HDGSolution) -> float:
    """max(1, ‖f‖, max |boundary datum|): reference size for residual tolerances."""
    boundary = [abs(bc.value) for bc in solution.system.problem.boundary.values()]
    return float(max([1.0, source_l2_norm(solution)] + boundary))
