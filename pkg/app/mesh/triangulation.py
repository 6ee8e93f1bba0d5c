"""
Conforming triangular meshes of rectangular domains.

Local facet j of a cell is the edge opposite its vertex j, i.e. the edge
(v[(j + 1) % 3], v[(j + 2) % 3]). Global facets store their vertex pair in
ascending order; facet_cells[f, 1] is -1 on the boundary.
"""
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from tqdm import tqdm

from app.utils.errors import ConfigurationError, InvalidArgumentError

if TYPE_CHECKING:
    from app.geometry.fractures import FractureSpec

BOUNDARY_SIDES = ("left", "right", "bottom", "top")
# Each longest-edge bisection shrinks a right-isosceles cell by sqrt(2).
BISECTIONS_PER_ROUND = 2


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle [x_min, x_max] x [y_min, y_max]."""
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise InvalidArgumentError(
                "Domain must have positive width and height",
                {"domain": (self.x_min, self.x_max, self.y_min, self.y_max)},
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.width, self.height))

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        return ((points[:, 0] >= self.x_min - tol) & (points[:, 0] <= self.x_max + tol)
                & (points[:, 1] >= self.y_min - tol) & (points[:, 1] <= self.y_max + tol))

    def side_of(self, point: np.ndarray, tol: float) -> str:
        """Name of the boundary side a boundary facet midpoint lies on."""
        x, y = point
        distances = {
            "left": abs(x - self.x_min),
            "right": abs(x - self.x_max),
            "bottom": abs(y - self.y_min),
            "top": abs(y - self.y_max),
        }
        side = min(BOUNDARY_SIDES, key=lambda s: distances[s])
        if distances[side] > tol:
            raise ConfigurationError(
                "Boundary facet does not lie on the domain perimeter",
                {"midpoint": (float(x), float(y))},
            )
        return side


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Immutable conforming triangulation.

    Attributes:
    -----------
    vertices : np.ndarray
        (nv, 2) coordinates.
    cells : np.ndarray
        (nc, 3) vertex indices, counter-clockwise.
    facets : np.ndarray
        (nf, 2) vertex indices, ascending.
    facet_cells : np.ndarray
        (nf, 2) incident cells, second entry -1 on the boundary.
    cell_facets : np.ndarray
        (nc, 3) global facet of each local facet.
    boundary_tags : Dict[int, str]
        Boundary facet -> side name.
    cell_diameters : np.ndarray
        (nc,) longest edge length h_K.
    """
    vertices: np.ndarray
    cells: np.ndarray
    domain: Domain
    facets: np.ndarray = field(repr=False)
    facet_cells: np.ndarray = field(repr=False)
    cell_facets: np.ndarray = field(repr=False)
    boundary_tags: Dict[int, str] = field(repr=False)
    cell_diameters: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices: np.ndarray, cells: np.ndarray, domain: Domain) -> "Mesh":
        """
        Build the facet table, boundary tags and diameters for a triangulation.
        """
        vertices = np.asarray(vertices, dtype=float)
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim != 2 or cells.shape[1] != 3:
            raise InvalidArgumentError("cells must be an (nc, 3) array", {"shape": cells.shape})

        areas = signed_areas(vertices, cells)
        if np.any(areas <= 0.0):
            bad = int(np.flatnonzero(areas <= 0.0)[0])
            raise InvalidArgumentError("Cell with non-positive signed area", {"cell": bad})

        # local facet j is opposite vertex j
        local_edges = np.stack([cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1)
        edges = np.sort(local_edges.reshape(-1, 2), axis=1)
        facets, inverse, counts = np.unique(edges, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise InvalidArgumentError("Non-manifold triangulation: facet shared by more than two cells")
        cell_facets = inverse.reshape(-1, 3)

        facet_cells = -np.ones((facets.shape[0], 2), dtype=np.int64)
        owners = np.repeat(np.arange(cells.shape[0]), 3)
        order = np.argsort(inverse, kind="stable")
        sorted_facets = inverse[order]
        sorted_owners = owners[order]
        first = np.ones(sorted_facets.shape[0], dtype=bool)
        first[1:] = sorted_facets[1:] != sorted_facets[:-1]
        facet_cells[sorted_facets[first], 0] = sorted_owners[first]
        facet_cells[sorted_facets[~first], 1] = sorted_owners[~first]

        tol = 1e-9 * domain.diameter
        boundary_tags: Dict[int, str] = {}
        for f in np.flatnonzero(facet_cells[:, 1] < 0):
            midpoint = vertices[facets[f]].mean(axis=0)
            boundary_tags[int(f)] = domain.side_of(midpoint, tol)

        lengths = np.linalg.norm(vertices[local_edges[:, :, 1]] - vertices[local_edges[:, :, 0]], axis=2)
        for array in (vertices, cells, facets, facet_cells, cell_facets):
            array.setflags(write=False)
        diameters = lengths.max(axis=1)
        diameters.setflags(write=False)
        return cls(vertices=vertices, cells=cells, domain=domain, facets=facets,
                   facet_cells=facet_cells, cell_facets=cell_facets,
                   boundary_tags=boundary_tags, cell_diameters=diameters)

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_facets(self) -> int:
        return self.facets.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    def boundary_facets(self) -> np.ndarray:
        return np.flatnonzero(self.facet_cells[:, 1] < 0)

    def cell_areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.cells)

    def cell_centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    def facets_with_tag(self, tag: str) -> List[int]:
        return [f for f, t in sorted(self.boundary_tags.items()) if t == tag]

    def is_conforming(self) -> bool:
        """True if no vertex lies in the interior of a facet (no hanging vertices)."""
        a = self.vertices[self.facets[:, 0]]
        b = self.vertices[self.facets[:, 1]]
        tol = 1e-12 * self.domain.diameter
        for v, x in enumerate(self.vertices):
            ab = b - a
            t = np.einsum("ij,ij->i", x - a, ab) / np.einsum("ij,ij->i", ab, ab)
            closest = a + np.clip(t, 0.0, 1.0)[:, None] * ab
            on_segment = (np.linalg.norm(closest - x, axis=1) < tol) & (t > 1e-12) & (t < 1 - 1e-12)
            if np.any(on_segment & (self.facets[:, 0] != v) & (self.facets[:, 1] != v)):
                return False
        return True


def signed_areas(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    p0 = vertices[cells[:, 0]]
    e1 = vertices[cells[:, 1]] - p0
    e2 = vertices[cells[:, 2]] - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def build_uniform_triangulation(nx: int, ny: int, domain: Domain) -> Mesh:
    """
    Structured mesh: each of the nx*ny rectangles is split along its
    lower-left to upper-right diagonal.

    Parameters:
    -----------
    nx, ny : int
        Subdivisions in x and y, both >= 1.
    domain : Domain
        The rectangle to mesh.

    Returns:
    --------
    Mesh
        Mesh with 2*nx*ny cells and boundary facets tagged left/right/bottom/top.
    """
    for name, value in (("nx", nx), ("ny", ny)):
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise InvalidArgumentError(f"{name} must be a positive integer", {name: value})

    xs = np.linspace(domain.x_min, domain.x_max, nx + 1)
    ys = np.linspace(domain.y_min, domain.y_max, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.stack([lower, upper], axis=1).reshape(-1, 3)

    mesh = Mesh.from_arrays(vertices, cells, domain)
    logger.debug(f"Built {nx}x{ny} background mesh: {mesh.num_cells} cells, {mesh.num_facets} facets")
    return mesh


def _longest_local_facet(mesh: Mesh) -> np.ndarray:
    """Local facet index of each cell's longest edge; ties go to the lower global facet."""
    v = mesh.vertices[mesh.cells]
    lengths = np.stack([
        np.linalg.norm(v[:, 2] - v[:, 1], axis=1),
        np.linalg.norm(v[:, 0] - v[:, 2], axis=1),
        np.linalg.norm(v[:, 1] - v[:, 0], axis=1),
    ], axis=1)
    longest = lengths.max(axis=1, keepdims=True)
    candidates = lengths >= longest * (1.0 - 1e-12)
    keys = np.where(candidates, mesh.cell_facets, np.iinfo(np.int64).max)
    return np.argmin(keys, axis=1)


def _split_cell(triangle: Tuple[int, int, int],
                midpoints: Dict[Tuple[int, int], int],
                vertices: List[np.ndarray]) -> List[Tuple[int, int, int]]:
    """
    Bisect a counter-clockwise triangle through its longest marked edge and
    recurse into the children until no child carries a marked edge.
    """
    marked = []
    for local in range(3):
        a, b = triangle[local], triangle[(local + 1) % 3]
        key = (min(a, b), max(a, b))
        if key in midpoints:
            length = float(np.linalg.norm(vertices[a] - vertices[b]))
            marked.append((length, -min(key), local, key))
    if not marked:
        return [triangle]

    _, _, local, key = max(marked)
    a, b, w = triangle[local], triangle[(local + 1) % 3], triangle[(local + 2) % 3]
    m = midpoints[key]
    children = [(a, m, w), (m, b, w)]
    result: List[Tuple[int, int, int]] = []
    for child in children:
        result.extend(_split_cell(child, midpoints, vertices))
    return result


def bisect(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """
    Longest-edge bisection of the marked cells with closure refinement.

    Every marked cell has its longest edge bisected. Any cell holding a bisected
    edge gets its own longest edge bisected too, until the marking is closed;
    the resulting mesh is conforming.

    Parameters:
    -----------
    mesh : Mesh
        Mesh to refine.
    marked : Iterable[int]
        Cell ids to refine.

    Returns:
    --------
    Mesh
        The refined mesh (the input mesh itself if nothing is marked).
    """
    marked = np.array(sorted(set(int(c) for c in marked)), dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_cells:
        raise InvalidArgumentError("Marked cell id out of range", {"num_cells": mesh.num_cells})

    longest = mesh.cell_facets[np.arange(mesh.num_cells), _longest_local_facet(mesh)]
    marked_facets = np.zeros(mesh.num_facets, dtype=bool)
    marked_facets[longest[marked]] = True
    while True:
        touched = marked_facets[mesh.cell_facets].any(axis=1)
        pending = touched & ~marked_facets[longest]
        if not pending.any():
            break
        marked_facets[longest[pending]] = True

    vertices: List[np.ndarray] = list(mesh.vertices)
    midpoints: Dict[Tuple[int, int], int] = {}
    for f in np.flatnonzero(marked_facets):
        a, b = (int(v) for v in mesh.facets[f])
        midpoints[(a, b)] = len(vertices)
        vertices.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))

    refine = marked_facets[mesh.cell_facets].any(axis=1)
    cells: List[Tuple[int, int, int]] = []
    for c, triangle in enumerate(mesh.cells):
        triangle = tuple(int(v) for v in triangle)
        if refine[c]:
            cells.extend(_split_cell(triangle, midpoints, vertices))
        else:
            cells.append(triangle)

    refined = Mesh.from_arrays(np.array(vertices), np.array(cells), mesh.domain)
    logger.debug(f"Bisection: {marked.size} marked, {int(refine.sum())} split, "
                 f"{mesh.num_cells} -> {refined.num_cells} cells")
    return refined


def refine_near_fractures(mesh: Mesh,
                          fractures: Sequence["FractureSpec"],
                          steps: int,
                          characteristic_length: Optional[float] = None,
                          show_progress: bool = False) -> Mesh:
    """
    Apply ``steps`` rounds of refinement near the fractures. A round classifies
    the cells, marks the fracture band (cut cells and cells touching a
    fracture) and bisects it, twice, so marked cells halve their diameter.

    Parameters:
    -----------
    mesh : Mesh
        Background mesh.
    fractures : Sequence[FractureSpec]
        Physical fractures.
    steps : int
        Number of refinement rounds (>= 0).
    characteristic_length : float, optional
        L used by the geometric tolerances; defaults to the domain diameter.
    show_progress : bool, optional
        Show a tqdm progress bar over the rounds.
    """
    from app.geometry.fractures import classify_cells, discretize_fracture

    if not isinstance(steps, (int, np.integer)) or steps < 0:
        raise InvalidArgumentError("steps must be a nonnegative integer", {"steps": steps})

    length = characteristic_length or mesh.domain.diameter
    for round_index in tqdm(range(steps), desc="refine", disable=not show_progress):
        marked_total = 0
        for _ in range(BISECTIONS_PER_ROUND):
            discrete = [discretize_fracture(spec, mesh, length) for spec in fractures]
            marked = classify_cells(mesh, discrete).fracture_band()
            if marked.size == 0:
                break
            marked_total += marked.size
            mesh = bisect(mesh, marked)
        if marked_total == 0:
            logger.info(f"Refinement round {round_index + 1}: no fractured cells, mesh unchanged")
            break
        logger.info(f"Refinement round {round_index + 1}/{steps}: marked {marked_total} cells, "
                    f"mesh now has {mesh.num_cells} cells")
    return mesh
