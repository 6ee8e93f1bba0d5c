"""
Level-set representation of line-segment fractures on a triangulation.

Each fracture is described by a main level set phi (signed distance to the
line through the segment) and two auxiliary level sets psi_1, psi_2 that clip
the zero set of phi to the segment. All three are stored as nodal values of
continuous piecewise linear functions, so the discrete fracture restricted to a
cell is a single line segment or empty.
"""
import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.config.settings import GEOMETRY_TOLERANCE, SLIVER_FRACTION
from app.mesh.triangulation import Mesh
from app.utils.errors import InvalidArgumentError

_EDGES = ((0, 1), (1, 2), (2, 0))


class FractureKind(enum.Enum):
    BLOCKING = "blocking"
    CONDUCTIVE = "conductive"


class CellClass(enum.IntEnum):
    REGULAR = 0
    BLOCKING = 1
    CONDUCTIVE = 2


@dataclass(frozen=True)
class FractureSpec:
    """
    A physical fracture: segment, thickness eps_i, permeability k_i and kind.

    The kind is declared, never inferred from k_i against the matrix permeability.
    """
    start: Tuple[float, float]
    end: Tuple[float, float]
    thickness: float
    permeability: float
    kind: FractureKind

    def __post_init__(self):
        if np.allclose(self.start, self.end, rtol=0.0, atol=0.0):
            raise InvalidArgumentError("Degenerate fracture segment (identical endpoints)",
                                       {"start": self.start, "end": self.end})
        if not self.thickness > 0.0:
            raise InvalidArgumentError("Fracture thickness must be positive", {"thickness": self.thickness})
        if not self.permeability > 0.0:
            raise InvalidArgumentError("Fracture permeability must be positive",
                                       {"permeability": self.permeability})
        if not isinstance(self.kind, FractureKind):
            object.__setattr__(self, "kind", FractureKind(self.kind))

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    @property
    def is_blocking(self) -> bool:
        return self.kind is FractureKind.BLOCKING


@dataclass(frozen=True, eq=False)
class DiscreteFracture:
    """
    Piecewise linear level-set realization of a fracture on one mesh.

    Attributes:
    -----------
    spec : FractureSpec
        The physical fracture.
    phi : np.ndarray
        (nv,) nodal values of the main level set.
    psi : Tuple[np.ndarray, ...]
        Nodal values of the auxiliary level sets; the fracture is where all are < 0.
    normal, tangent : np.ndarray
        Unit normal n_i and unit tangent t_i.
    tolerance : float
        eps_geom used for the vertex perturbation.
    on_fracture : np.ndarray
        (nv,) vertices lying on the segment within eps_geom, before perturbation.
    """
    spec: FractureSpec
    phi: np.ndarray = field(repr=False)
    psi: Tuple[np.ndarray, ...] = field(repr=False)
    normal: np.ndarray
    tangent: np.ndarray
    tolerance: float
    on_fracture: np.ndarray = field(repr=False)

    @property
    def kind(self) -> FractureKind:
        return self.spec.kind

    def normal_projector(self) -> np.ndarray:
        """n n^T (sign invariant)."""
        return np.outer(self.normal, self.normal)

    def tangential_projector(self) -> np.ndarray:
        """I - n n^T (sign invariant)."""
        return np.eye(2) - self.normal_projector()

    def cut(self, mesh: Mesh, cell: int, min_length: float = 0.0) -> Optional["CutSegment"]:
        nodes = mesh.cells[cell]
        return cut_segment(mesh.vertices[nodes], self.phi[nodes],
                           [psi[nodes] for psi in self.psi],
                           tolerance=self.tolerance, min_length=min_length)


@dataclass(frozen=True)
class CutSegment:
    """Intersection K ∩ Γ_{i,h}: endpoints (2, 2) and length."""
    points: np.ndarray
    length: float
    fracture: int = -1

    def with_fracture(self, index: int) -> "CutSegment":
        return CutSegment(points=self.points, length=self.length, fracture=index)


@dataclass
class CellClassification:
    """
    Partition of the cells into regular / blocking / conductive, plus cut segments.

    Attributes:
    -----------
    class_of : np.ndarray
        (nc,) CellClass codes.
    cuts : Dict[int, List[CutSegment]]
        Cell -> cut segments (fracture index set on each). Conductive cuts in
        blocking cells are not stored.
    stabilization_class : np.ndarray
        (nc,) class whose stabilization the cell uses. Equals class_of, except
        that regular cells with a vertex on a fracture take that fracture's
        class. A fracture running along mesh edges cuts only the cells on one
        side and touches the ones in between at a vertex; those carry no
        segment term but keep the fracture stabilization.
    """
    class_of: np.ndarray
    cuts: Dict[int, List[CutSegment]]
    stabilization_class: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.stabilization_class is None:
            self.stabilization_class = self.class_of.copy()

    def cells_in(self, cell_class: CellClass) -> np.ndarray:
        return np.flatnonzero(self.class_of == cell_class)

    def fractured_cells(self) -> np.ndarray:
        return np.flatnonzero(self.class_of != CellClass.REGULAR)

    def fracture_band(self) -> np.ndarray:
        """Cut cells plus the regular cells touching a fracture."""
        return np.flatnonzero(self.stabilization_class != CellClass.REGULAR)

    def counts(self) -> Dict[str, int]:
        return {c.name.lower(): int(np.count_nonzero(self.class_of == c)) for c in CellClass}

    @property
    def num_cuts(self) -> int:
        return sum(len(v) for v in self.cuts.values())

    def cuts_of(self, cell: int) -> List[CutSegment]:
        return self.cuts.get(int(cell), [])


def _perturb(values: np.ndarray, tolerance: float) -> np.ndarray:
    values = np.array(values, dtype=float)
    values[np.abs(values) <= tolerance] = tolerance
    return values


def discretize_fracture(spec: FractureSpec, mesh: Mesh, characteristic_length: Optional[float] = None) -> DiscreteFracture:
    """
    Nodal level sets of a fracture on ``mesh``.

    phi(x) = (x - a)·n, psi_1(x) = (a - x)·t, psi_2(x) = (x - b)·t, with a, b the
    segment endpoints, t = (b - a)/|b - a| and n the unit normal oriented with
    n_x > 0 (or n_x = 0, n_y > 0). Nodal values within eps_geom of zero are
    moved to +eps_geom.

    Parameters:
    -----------
    spec : FractureSpec
        The fracture.
    mesh : Mesh
        Mesh whose vertices carry the nodal values.
    characteristic_length : float, optional
        L; eps_geom = GEOMETRY_TOLERANCE * L. Defaults to the domain diameter.
    """
    a = np.asarray(spec.start, dtype=float)
    b = np.asarray(spec.end, dtype=float)
    length = np.linalg.norm(b - a)
    if length == 0.0:
        raise InvalidArgumentError("Degenerate fracture segment", {"start": spec.start, "end": spec.end})
    tangent = (b - a) / length
    normal = np.array([-tangent[1], tangent[0]])
    if normal[0] < -1e-15 or (abs(normal[0]) <= 1e-15 and normal[1] < 0.0):
        normal = -normal

    tolerance = GEOMETRY_TOLERANCE * (characteristic_length or mesh.domain.diameter)
    x = mesh.vertices
    raw_phi = (x - a) @ normal
    raw_psi = ((a - x) @ tangent, (x - b) @ tangent)
    on_fracture = (np.abs(raw_phi) <= tolerance) & (raw_psi[0] <= tolerance) & (raw_psi[1] <= tolerance)
    phi = _perturb(raw_phi, tolerance)
    psi = tuple(_perturb(values, tolerance) for values in raw_psi)
    for array in (phi, *psi, on_fracture):
        array.setflags(write=False)
    return DiscreteFracture(spec=spec, phi=phi, psi=psi, normal=normal, tangent=tangent, tolerance=tolerance,
                            on_fracture=on_fracture)


def cut_segment(vertices: np.ndarray,
                phi: np.ndarray,
                psi: Sequence[np.ndarray] = (),
                tolerance: float = GEOMETRY_TOLERANCE,
                min_length: float = 0.0) -> Optional[CutSegment]:
    """
    Intersect the zero set of the affine interpolant of ``phi`` with a closed
    triangle and clip it to {psi_j < 0} for every auxiliary level set.

    Parameters:
    -----------
    vertices : np.ndarray
        (3, 2) triangle vertices.
    phi : np.ndarray
        (3,) nodal values of the main level set.
    psi : Sequence[np.ndarray]
        (3,) nodal values of each auxiliary level set.
    tolerance : float
        eps_geom; nodal values with |value| <= eps_geom are set to +eps_geom.
    min_length : float
        Cuts shorter than max(eps_geom, min_length) are discarded.

    Returns:
    --------
    Optional[CutSegment]
        The cut, or None when the intersection is empty.
    """
    vertices = np.asarray(vertices, dtype=float)
    phi = _perturb(phi, tolerance)

    crossings = []
    for i, j in _EDGES:
        if phi[i] * phi[j] < 0.0:
            t = phi[i] / (phi[i] - phi[j])
            bary = np.zeros(3)
            bary[i] = 1.0 - t
            bary[j] = t
            crossings.append(bary)
    if len(crossings) != 2:
        return None
    b0, b1 = crossings

    for values in psi:
        values = _perturb(values, tolerance)
        s0, s1 = b0 @ values, b1 @ values
        if s0 >= 0.0 and s1 >= 0.0:
            return None
        if s0 >= 0.0:
            t = s0 / (s0 - s1)
            b0 = (1.0 - t) * b0 + t * b1
        elif s1 >= 0.0:
            t = s1 / (s1 - s0)
            b1 = (1.0 - t) * b1 + t * b0

    points = np.vstack([b0 @ vertices, b1 @ vertices])
    length = float(np.linalg.norm(points[1] - points[0]))
    if length < max(tolerance, min_length):
        return None
    return CutSegment(points=points, length=length)


def classify_cells(mesh: Mesh, fractures: Sequence[DiscreteFracture]) -> CellClassification:
    """
    Split the cells into regular, blocking and conductive classes.

    A cell is blocking iff it has a cut with any blocking fracture; else
    conductive iff it has a cut with any conductive fracture; else regular.
    Conductive cuts inside blocking cells are dropped. Regular cells with a
    vertex on a fracture get its stabilization class (blocking first).

    Parameters:
    -----------
    mesh : Mesh
        The mesh the fractures were discretized on.
    fractures : Sequence[DiscreteFracture]
        Discrete fractures; their position in the sequence is the fracture index.

    Returns:
    --------
    CellClassification
        Classes and per-cell cut segments.
    """
    all_cuts: Dict[int, List[CutSegment]] = {}
    slivers = 0
    for index, fracture in enumerate(fractures):
        if fracture.phi.shape[0] != mesh.num_vertices:
            raise InvalidArgumentError("Fracture was discretized on a different mesh", {"fracture": index})
        phi_cells = fracture.phi[mesh.cells]
        candidates = (phi_cells.min(axis=1) < 0.0) & (phi_cells.max(axis=1) > 0.0)
        for psi in fracture.psi:
            candidates &= psi[mesh.cells].min(axis=1) < 0.0
        for cell in np.flatnonzero(candidates):
            min_length = SLIVER_FRACTION * mesh.cell_diameters[cell]
            segment = fracture.cut(mesh, int(cell), min_length=min_length)
            if segment is None:
                slivers += 1
                continue
            all_cuts.setdefault(int(cell), []).append(segment.with_fracture(index))

    class_of = np.full(mesh.num_cells, CellClass.REGULAR, dtype=np.int8)
    cuts: Dict[int, List[CutSegment]] = {}
    dropped = 0
    for cell in sorted(all_cuts):
        segments = all_cuts[cell]
        blocking = [s for s in segments if fractures[s.fracture].spec.is_blocking]
        if blocking:
            class_of[cell] = CellClass.BLOCKING
            cuts[cell] = blocking
            dropped += len(segments) - len(blocking)
        else:
            class_of[cell] = CellClass.CONDUCTIVE
            cuts[cell] = segments

    stabilization_class = class_of.copy()
    touching = {kind: np.zeros(mesh.num_cells, dtype=bool) for kind in FractureKind}
    for fracture in fractures:
        touching[fracture.kind] |= fracture.on_fracture[mesh.cells].any(axis=1)
    regular = class_of == CellClass.REGULAR
    stabilization_class[regular & touching[FractureKind.CONDUCTIVE]] = CellClass.CONDUCTIVE
    stabilization_class[regular & touching[FractureKind.BLOCKING]] = CellClass.BLOCKING

    classification = CellClassification(class_of=class_of, cuts=cuts, stabilization_class=stabilization_class)
    if dropped:
        logger.warning(f"Ignored {dropped} conductive cuts inside blocking cells")
    if slivers:
        logger.debug(f"Discarded {slivers} empty or sliver cuts")
    logger.debug(f"Classified {mesh.num_cells} cells: {classification.counts()}")
    return classification
