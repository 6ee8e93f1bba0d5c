"""
Element-local HDG systems, static condensation and global assembly.

Cell unknowns are ordered (u, ũ, p) with each vector field stored as
[x-components, y-components]. The local equations are

    (a u, ṽ) + Φb(u, ṽ) - (a ũ, ṽ) - Φc(ũ, ṽ)                 = 0
    (a ũ, v) - (p, div v) + <p̂, v·n>                          = 0
    -(u, grad q) + <u·n, q> + <α p, q> - <α p̂, q>            = (f, q)

with a = 1/K_m, written as A x + B p̂ = f. The facet equation is
C x + D p̂ = <û·n, q̂>, so each cell contributes K = C A⁻¹ B - D and
r = C A⁻¹ f to the condensed system K p̂ = r - <g, q̂>.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from loguru import logger
from tqdm import tqdm

from app.fem.basis import AffineMap, CellBasis, FacetBasis, REFERENCE_VERTICES, cell_basis, facet_basis
from app.fem.quadrature import QuadratureRule, segment_quadrature, triangle_quadrature
from app.config.settings import DENSE_CHOLESKY_LIMIT
from app.geometry.fractures import CellClass, CellClassification, CutSegment, DiscreteFracture
from app.mesh.triangulation import Mesh
from app.postprocess.solution import HDGSolution
from app.solver.linsolve import check_spd
from app.utils.errors import AssemblyError, ConfigurationError, InvalidArgumentError, NumericalError

SourceFunction = Callable[[np.ndarray], np.ndarray]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class PenaltyParams:
    """
    Stabilization parameters.

    Attributes:
    -----------
    C_b, s_b : float
        Blocking-cell factor and exponent: alpha = C_b (h_K/L)^s_b K_m.
    C_c, s_c : float
        Conductive-cell factor and exponent: alpha = C_c (h_K/L)^-s_c K_m.
    L : float
        Characteristic length.
    global_scale : float
        Multiplier applied to alpha on every cell.
    """
    C_b: float = 1.0
    s_b: float = 0.0
    C_c: float = 1.0
    s_c: float = 3.0
    L: float = 1.0
    global_scale: float = 1.0

    def __post_init__(self):
        for name in ("C_b", "C_c", "L", "global_scale"):
            if not getattr(self, name) > 0.0:
                raise InvalidArgumentError(f"Penalty parameter {name} must be positive", {name: getattr(self, name)})
        for name in ("s_b", "s_c"):
            if not getattr(self, name) >= 0.0:
                raise InvalidArgumentError(f"Penalty exponent {name} must be nonnegative", {name: getattr(self, name)})

    @staticmethod
    def default_s_c(degree: int) -> float:
        return 2.0 if degree == 0 else 3.0

    @classmethod
    def defaults_for(cls, degree: int, characteristic_length: float = 1.0) -> "PenaltyParams":
        return cls(s_c=cls.default_s_c(degree), L=characteristic_length)


@dataclass(frozen=True)
class BoundaryData:
    """Condition on one boundary side: Dirichlet pressure or outward normal flux."""
    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN):
            raise InvalidArgumentError(f"Unknown boundary condition type '{self.kind}'")

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == DIRICHLET


@dataclass(frozen=True, eq=False)
class ProblemData:
    """
    Numerical problem data on a fixed mesh.

    Attributes:
    -----------
    permeability : np.ndarray
        (nc,) matrix permeability K_m per cell.
    source : SourceFunction
        f evaluated at (nq, 2) physical points.
    boundary : Dict[str, BoundaryData]
        Boundary tag -> condition.
    fractures : Sequence[DiscreteFracture]
        Discrete fractures, indexed as in the classification cuts.
    """
    permeability: np.ndarray
    source: SourceFunction
    boundary: Dict[str, BoundaryData]
    fractures: Sequence[DiscreteFracture] = ()


def zero_source(points: np.ndarray) -> np.ndarray:
    return np.zeros(np.atleast_2d(points).shape[0])


@dataclass(frozen=True, eq=False)
class ReferenceTables:
    """
    Basis values at the quadrature points of one scheme degree.

    facet_phi[j] holds cell basis values on local facet j, the edge from
    reference vertex j+1 to j+2 (mod 3), at the facet quadrature parameters.
    """
    degree: int
    cell: CellBasis
    facet: FacetBasis
    cell_rule: QuadratureRule
    facet_rule: QuadratureRule
    segment_rule: QuadratureRule
    phi: np.ndarray = field(repr=False)
    dphi: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    facet_phi: Tuple[np.ndarray, ...] = field(repr=False)
    mu: np.ndarray = field(repr=False)
    mu_flipped: np.ndarray = field(repr=False)

    @property
    def cell_dim(self) -> int:
        return self.cell.dim

    @property
    def facet_dim(self) -> int:
        return self.facet.dim


@lru_cache(maxsize=None)
def reference_tables(degree: int) -> ReferenceTables:
    cell = cell_basis(degree)
    facet = facet_basis(degree)
    cell_rule = triangle_quadrature(2 * degree + 2)
    facet_rule = segment_quadrature(2 * degree + 1)
    segment_rule = segment_quadrature(2 * degree + 1)

    phi, dphi = cell.evaluate(cell_rule.points)
    mass = np.einsum("q,qi,qj->ij", cell_rule.weights, phi, phi)
    s = facet_rule.points[:, 0]
    facet_phi = []
    for j in range(3):
        start = REFERENCE_VERTICES[(j + 1) % 3]
        end = REFERENCE_VERTICES[(j + 2) % 3]
        values, _ = cell.evaluate(start + s[:, None] * (end - start))
        facet_phi.append(values)
    return ReferenceTables(degree=degree, cell=cell, facet=facet, cell_rule=cell_rule, facet_rule=facet_rule,
                           segment_rule=segment_rule, phi=phi, dphi=dphi, mass=mass,
                           facet_phi=tuple(facet_phi), mu=facet.evaluate(s), mu_flipped=facet.evaluate(1.0 - s))


def stabilization(h_K: float, cell_class: CellClass, params: PenaltyParams, K_m: float) -> float:
    """
    Stabilization alpha on the boundary of one cell.

    Parameters:
    -----------
    h_K : float
        Cell diameter.
    cell_class : CellClass
        Regular, blocking or conductive.
    params : PenaltyParams
        Penalty parameters.
    K_m : float
        Matrix permeability on the cell.

    Returns:
    --------
    float
        K_m (regular), C_b (h_K/L)^s_b K_m (blocking) or C_c (h_K/L)^-s_c K_m (conductive),
        times params.global_scale.
    """
    ratio = h_K / params.L
    if cell_class == CellClass.BLOCKING:
        alpha = params.C_b * ratio ** params.s_b * K_m
    elif cell_class == CellClass.CONDUCTIVE:
        alpha = params.C_c * ratio ** (-params.s_c) * K_m
    else:
        alpha = K_m
    return alpha * params.global_scale


@dataclass(eq=False)
class LocalSystem:
    """
    Dense local blocks of one cell: A x + B p̂ = f and flux moments C x + D p̂.

    The pieces kept next to the blocks are the ones the diagnostics reuse.
    """
    cell: int
    cell_class: CellClass
    alpha: float
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    inverse_permeability: float = 1.0
    phi_b: np.ndarray = field(default=None, repr=False)
    phi_c: np.ndarray = field(default=None, repr=False)
    stab: np.ndarray = field(default=None, repr=False)
    stab_coupling: np.ndarray = field(default=None, repr=False)
    stab_facet: np.ndarray = field(default=None, repr=False)
    load: np.ndarray = field(default=None, repr=False)

    @property
    def cell_dim(self) -> int:
        return self.mass.shape[0]

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Split a cell vector into (u, ũ, p)."""
        n = self.cell_dim
        return x[:2 * n], x[2 * n:4 * n], x[4 * n:]

    def residual(self, x: np.ndarray, p_hat: np.ndarray) -> float:
        """Relative residual of the cell equations for given (x, p̂)."""
        r = self.A @ x + self.B @ p_hat - self.f
        scale = max(np.linalg.norm(self.A @ x), np.linalg.norm(self.B @ p_hat), np.linalg.norm(self.f), 1e-300)
        return float(np.linalg.norm(r) / scale)

    def flux_moments(self, x: np.ndarray, p_hat: np.ndarray) -> np.ndarray:
        """<û·n, μ_l> on each local facet, shape (3 * facet_dim,)."""
        return self.C @ x + self.D @ p_hat

    def energy(self, x: np.ndarray) -> float:
        """E(u, ũ) restricted to this cell."""
        u, u_tilde, _ = self.split(x)
        a = self.inverse_permeability
        mass = np.kron(np.eye(2), self.mass)
        if self.cell_class == CellClass.CONDUCTIVE:
            return float(a * u_tilde @ mass @ u_tilde + u_tilde @ self.phi_c @ u_tilde)
        return float(a * u @ mass @ u + u @ self.phi_b @ u)

    def stabilization_energy(self, x: np.ndarray, p_hat: np.ndarray) -> float:
        """<α (p - p̂), p - p̂> over the cell boundary."""
        _, _, p = self.split(x)
        return float(p @ self.stab @ p - 2.0 * p @ self.stab_coupling @ p_hat + p_hat @ self.stab_facet @ p_hat)


@dataclass(frozen=True, eq=False)
class CondensedBlock:
    """Cell Schur block, its rhs, and the recovery x = A⁻¹f - A⁻¹B p̂."""
    matrix: np.ndarray
    rhs: np.ndarray
    solve_load: np.ndarray
    solve_coupling: np.ndarray

    def recover(self, p_hat: np.ndarray) -> np.ndarray:
        return self.solve_load - self.solve_coupling @ p_hat


def _facet_orientation(mesh: Mesh, cell: int, local: int) -> bool:
    """True when local facet ``local`` runs in the global facet direction."""
    facet = mesh.cell_facets[cell, local]
    return mesh.cells[cell, (local + 1) % 3] == mesh.facets[facet, 0]


def build_local(mesh: Mesh,
                cell: int,
                classification: CellClassification,
                problem: ProblemData,
                alpha: float,
                tables: ReferenceTables) -> LocalSystem:
    """
    Build the local blocks of one cell.

    Parameters:
    -----------
    mesh : Mesh
        The mesh.
    cell : int
        Cell id.
    classification : CellClassification
        Cell classes and cut segments.
    problem : ProblemData
        Permeability, source and fractures.
    alpha : float
        Stabilization on this cell.
    tables : ReferenceTables
        Basis and quadrature tables of the scheme degree.

    Returns:
    --------
    LocalSystem
        The local blocks.
    """
    K_m = float(problem.permeability[cell])
    if not K_m > 0.0 or not np.isfinite(K_m):
        raise AssemblyError("Matrix permeability must be positive and finite", cell, {"K_m": K_m})
    if not alpha > 0.0 or not np.isfinite(alpha):
        raise AssemblyError("Stabilization must be positive and finite", cell, {"alpha": alpha})

    cell_class = CellClass(int(classification.class_of[cell]))
    nodes = mesh.cells[cell]
    vertices = mesh.vertices[nodes]
    amap = AffineMap.from_vertices(vertices)
    n, m = tables.cell_dim, tables.facet_dim
    a = 1.0 / K_m

    weights = amap.det * tables.cell_rule.weights
    grads = amap.physical_gradients(tables.dphi)
    mass = amap.det * tables.mass
    # div[(c, j), i] = (d_c phi_j, phi_i)
    div = np.einsum("q,qjc,qi->cji", weights, grads, tables.phi).reshape(2 * n, n)
    grad = div.reshape(2, n, n).transpose(1, 0, 2).reshape(n, 2 * n)

    source_values = problem.source(amap.to_physical(tables.cell_rule.points))
    load = np.einsum("q,q,qi->i", weights, source_values, tables.phi)

    trace = np.zeros((2 * n, 3 * m))
    normal_trace = np.zeros((n, 2 * n))
    stab = np.zeros((n, n))
    stab_coupling = np.zeros((n, 3 * m))
    stab_facet = np.zeros((3 * m, 3 * m))
    for j in range(3):
        edge = vertices[(j + 2) % 3] - vertices[(j + 1) % 3]
        length = float(np.hypot(edge[0], edge[1]))
        normal = np.array([edge[1], -edge[0]]) / length
        phi_f = tables.facet_phi[j]
        mu = tables.mu if _facet_orientation(mesh, cell, j) else tables.mu_flipped
        w = length * tables.facet_rule.weights
        cols = slice(j * m, (j + 1) * m)

        phi_mu = np.einsum("q,qi,ql->il", w, phi_f, mu)
        phi_phi = np.einsum("q,qi,qk->ik", w, phi_f, phi_f)
        trace[:n, cols] += normal[0] * phi_mu
        trace[n:, cols] += normal[1] * phi_mu
        normal_trace[:, :n] += normal[0] * phi_phi
        normal_trace[:, n:] += normal[1] * phi_phi
        stab += alpha * phi_phi
        stab_coupling[:, cols] += alpha * phi_mu
        stab_facet[cols, cols] += alpha * np.einsum("q,ql,qr->lr", w, mu, mu)

    phi_b = np.zeros((2 * n, 2 * n))
    phi_c = np.zeros((2 * n, 2 * n))
    for segment in classification.cuts_of(cell):
        fracture = problem.fractures[segment.fracture]
        cut_mass = _segment_mass(segment, amap, tables)
        spec = fracture.spec
        if cell_class == CellClass.BLOCKING and spec.is_blocking:
            phi_b += (spec.thickness / spec.permeability) * np.kron(fracture.normal_projector(), cut_mass)
        elif cell_class == CellClass.CONDUCTIVE and not spec.is_blocking:
            phi_c += spec.thickness * spec.permeability * a * a * np.kron(fracture.tangential_projector(), cut_mass)

    vector_mass = a * np.kron(np.eye(2), mass)
    A = np.block([
        [vector_mass + phi_b, -(vector_mass + phi_c), np.zeros((2 * n, n))],
        [np.zeros((2 * n, 2 * n)), vector_mass, -div],
        [normal_trace - grad, np.zeros((n, 2 * n)), stab],
    ])
    B = np.vstack([np.zeros((2 * n, 3 * m)), trace, -stab_coupling])
    C = np.hstack([trace.T, np.zeros((3 * m, 2 * n)), stab_coupling.T])
    f = np.concatenate([np.zeros(4 * n), load])

    return LocalSystem(cell=cell, cell_class=cell_class, alpha=alpha, A=A, B=B, f=f, C=C, D=-stab_facet,
                       mass=mass, inverse_permeability=a, phi_b=phi_b, phi_c=phi_c, stab=stab,
                       stab_coupling=stab_coupling, stab_facet=stab_facet, load=load)


def _segment_mass(segment: CutSegment, amap: AffineMap, tables: ReferenceTables) -> np.ndarray:
    s = tables.segment_rule.points[:, 0]
    w = segment.length * tables.segment_rule.weights
    start, end = segment.points
    points = start + s[:, None] * (end - start)
    values, _ = tables.cell.evaluate(amap.to_reference(points))
    return np.einsum("q,qi,qk->ik", w, values, values)


def condense(local: LocalSystem) -> CondensedBlock:
    """
    Eliminate (u, ũ, p) from one cell.

    Returns:
    --------
    CondensedBlock
        K = C A⁻¹ B - D, r = C A⁻¹ f, and the two recovery operators.
    """
    try:
        solved = np.linalg.solve(local.A, np.column_stack([local.B, local.f]))
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("Singular local block", local.cell, {"class": local.cell_class.name.lower()}) from exc
    if not np.all(np.isfinite(solved)):
        raise AssemblyError("Local solve produced non-finite values", local.cell)
    coupling = solved[:, :-1]
    load = solved[:, -1]
    matrix = local.C @ coupling - local.D
    return CondensedBlock(matrix=matrix, rhs=local.C @ load, solve_load=load, solve_coupling=coupling)


@dataclass(eq=False)
class CondensedSystem:
    """
    Global facet system over the free (non-Dirichlet) p̂ DOFs.

    Facet f owns DOFs f*m .. f*m + m - 1 with m = facet_dim.
    """
    mesh: Mesh
    classification: CellClassification
    problem: ProblemData
    degree: int
    params: PenaltyParams
    matrix: sp.csr_matrix = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    free_dofs: np.ndarray = field(repr=False)
    dirichlet_dofs: np.ndarray = field(repr=False)
    dirichlet_values: np.ndarray = field(repr=False)
    locals: List[LocalSystem] = field(repr=False)
    blocks: List[CondensedBlock] = field(repr=False)
    neumann_load: np.ndarray = field(repr=False)

    @property
    def tables(self) -> ReferenceTables:
        return reference_tables(self.degree)

    @property
    def facet_dim(self) -> int:
        return self.degree + 1

    @property
    def num_dofs(self) -> int:
        return int(self.free_dofs.shape[0])

    @property
    def num_total_dofs(self) -> int:
        return self.mesh.num_facets * self.facet_dim

    def facet_of_dof(self, free_index: int) -> int:
        return int(self.free_dofs[free_index] // self.facet_dim)

    def cell_dofs(self, cell: int) -> np.ndarray:
        m = self.facet_dim
        return (self.mesh.cell_facets[cell][:, None] * m + np.arange(m)[None, :]).ravel()

    def expand(self, free_solution: np.ndarray) -> np.ndarray:
        """Full p̂ vector including the Dirichlet values."""
        free_solution = np.asarray(free_solution, dtype=float)
        if free_solution.shape != (self.num_dofs,):
            raise InvalidArgumentError("Facet solution length does not match the system",
                                       {"expected": self.num_dofs, "got": free_solution.shape})
        full = np.zeros(self.num_total_dofs)
        full[self.free_dofs] = free_solution
        full[self.dirichlet_dofs] = self.dirichlet_values
        return full

    def symmetry_defect(self) -> float:
        norm = spla.norm(self.matrix)
        if norm == 0.0:
            return 0.0
        return float(abs(self.matrix - self.matrix.T).max() / norm)

    def verify_spd(self) -> None:
        """
        Dense Cholesky check for small systems, diagonal check otherwise.
        Raises NumericalError naming the facet where positivity fails.
        """
        diagonal = self.matrix.diagonal()
        bad = np.flatnonzero(diagonal <= 0.0)
        if bad.size:
            facet = self.facet_of_dof(int(bad[0]))
            raise NumericalError("Condensed matrix is not positive definite (non-positive diagonal)",
                                 {"facet": facet})
        if self.num_dofs <= DENSE_CHOLESKY_LIMIT:
            row = check_spd(self.matrix)
            if row is not None:
                raise NumericalError("Condensed matrix is not positive definite (Cholesky failed)",
                                     {"facet": self.facet_of_dof(row)})


def _boundary_moments(mesh: Mesh, facet: int, tables: ReferenceTables) -> np.ndarray:
    """∫_F μ_l ds for the facet basis in global orientation."""
    a, b = mesh.vertices[mesh.facets[facet]]
    length = float(np.linalg.norm(b - a))
    return length * (tables.facet_rule.weights @ tables.mu)


def project_facet_value(value: float, tables: ReferenceTables) -> np.ndarray:
    """L² projection of a constant onto P_k(F) in the nodal facet basis."""
    mass = np.einsum("q,qi,qj->ij", tables.facet_rule.weights, tables.mu, tables.mu)
    moments = value * (tables.facet_rule.weights @ tables.mu)
    return np.linalg.solve(mass, moments)


def assemble(mesh: Mesh,
             classification: CellClassification,
             problem: ProblemData,
             params: PenaltyParams,
             degree: int,
             show_progress: bool = False) -> CondensedSystem:
    """
    Assemble the condensed facet system.

    Parameters:
    -----------
    mesh : Mesh
        The mesh.
    classification : CellClassification
        Classification of ``mesh`` against ``problem.fractures``.
    problem : ProblemData
        Permeability, source, boundary data and fractures.
    params : PenaltyParams
        Stabilization parameters.
    degree : int
        Scheme degree k.
    show_progress : bool, optional
        Show a tqdm bar over cells. Default is False.

    Returns:
    --------
    CondensedSystem
        Matrix and rhs over the non-Dirichlet facet DOFs.
    """
    if classification.class_of.shape[0] != mesh.num_cells:
        raise InvalidArgumentError("Classification does not match the mesh",
                                   {"cells": mesh.num_cells, "classified": classification.class_of.shape[0]})
    permeability = np.asarray(problem.permeability, dtype=float)
    if permeability.shape != (mesh.num_cells,):
        raise InvalidArgumentError("Permeability must have one value per cell", {"shape": permeability.shape})

    tables = reference_tables(degree)
    m = tables.facet_dim
    total = mesh.num_facets * m

    locals_: List[LocalSystem] = []
    blocks: List[CondensedBlock] = []
    rows, cols, values = [], [], []
    rhs = np.zeros(total)
    cells = range(mesh.num_cells)
    for cell in tqdm(cells, desc="assemble", disable=not show_progress, leave=False):
        cell_class = CellClass(int(classification.stabilization_class[cell]))
        alpha = stabilization(float(mesh.cell_diameters[cell]), cell_class, params, float(permeability[cell]))
        local = build_local(mesh, cell, classification, problem, alpha, tables)
        block = condense(local)
        dofs = (mesh.cell_facets[cell][:, None] * m + np.arange(m)[None, :]).ravel()
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        values.append(block.matrix.ravel())
        rhs[dofs] += block.rhs
        locals_.append(local)
        blocks.append(block)

    matrix = sp.coo_matrix((np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(total, total)).tocsr()

    dirichlet_dofs: List[int] = []
    dirichlet_values: List[float] = []
    neumann_load = np.zeros(total)
    for facet in mesh.boundary_facets():
        facet = int(facet)
        tag = mesh.boundary_tags.get(facet)
        if tag is None:
            raise ConfigurationError("Untagged boundary facet", {"facet": facet})
        condition = problem.boundary.get(tag)
        if condition is None:
            raise ConfigurationError(f"No boundary condition for boundary '{tag}'", {"facet": facet, "tag": tag})
        dofs = facet * m + np.arange(m)
        if condition.is_dirichlet:
            dirichlet_dofs.extend(dofs.tolist())
            dirichlet_values.extend(project_facet_value(condition.value, tables).tolist())
        elif condition.value != 0.0:
            neumann_load[dofs] += condition.value * _boundary_moments(mesh, facet, tables)

    if not dirichlet_dofs:
        raise NumericalError("Singular system: no Dirichlet boundary, pressure defined up to a constant",
                             {"boundary": sorted(problem.boundary)})

    dirichlet_dofs_arr = np.array(dirichlet_dofs, dtype=int)
    dirichlet_values_arr = np.array(dirichlet_values, dtype=float)
    free = np.ones(total, dtype=bool)
    free[dirichlet_dofs_arr] = False
    free_dofs = np.flatnonzero(free)

    rhs = rhs - neumann_load
    lifted = np.zeros(total)
    lifted[dirichlet_dofs_arr] = dirichlet_values_arr
    reduced_rhs = rhs[free_dofs] - (matrix @ lifted)[free_dofs]
    reduced = matrix[free_dofs][:, free_dofs].tocsr()

    logger.info(f"Assembled degree-{degree} system: {mesh.num_cells} cells, "
                f"{free_dofs.size} free facet DOFs, {dirichlet_dofs_arr.size} Dirichlet DOFs, nnz={reduced.nnz}")
    return CondensedSystem(mesh=mesh, classification=classification, problem=problem, degree=degree, params=params,
                           matrix=reduced, rhs=reduced_rhs, free_dofs=free_dofs, dirichlet_dofs=dirichlet_dofs_arr,
                           dirichlet_values=dirichlet_values_arr, locals=locals_, blocks=blocks,
                           neumann_load=neumann_load)


def recover(system: CondensedSystem, facet_solution: np.ndarray) -> HDGSolution:
    """
    Cell unknowns from the facet solution.

    Parameters:
    -----------
    system : CondensedSystem
        The assembled system.
    facet_solution : np.ndarray
        Solution over the free facet DOFs.

    Returns:
    --------
    HDGSolution
        u, ũ, p per cell and p̂ per facet (Dirichlet values included).
    """

    p_hat_full = system.expand(facet_solution)
    n = system.tables.cell_dim
    num_cells = system.mesh.num_cells
    u = np.zeros((num_cells, 2 * n))
    u_tilde = np.zeros((num_cells, 2 * n))
    p = np.zeros((num_cells, n))
    for cell, block in enumerate(system.blocks):
        x = block.recover(p_hat_full[system.cell_dofs(cell)])
        u[cell], u_tilde[cell], p[cell] = x[:2 * n], x[2 * n:4 * n], x[4 * n:]
    return HDGSolution(system=system, u=u, u_tilde=u_tilde, p=p,
                       p_hat=p_hat_full.reshape(system.mesh.num_facets, system.facet_dim))
