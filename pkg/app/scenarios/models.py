"""
Scenario models.

A scenario is the complete problem description of one run: domain, matrix
permeability, fractures, boundary data, source, penalties, degree, mesh and
requested outputs. Scenarios are stored as JSON and validated with pydantic.
"""
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, NonNegativeInt, PositiveFloat, PositiveInt, \
    model_validator

from app.config.settings import DEFAULT_LINE_SAMPLES, SOLVER_TOLERANCE
from app.geometry.fractures import DiscreteFracture, FractureKind, FractureSpec
from app.mesh.triangulation import Domain, Mesh
from app.scenarios.manufactured import manufactured_source
from app.solver.assembly import BoundaryData, PenaltyParams, ProblemData, zero_source

BOUNDARY_SIDES = ("left", "right", "bottom", "top")
MANUFACTURED = "manufactured"

OutputKind = Literal["line_cuts", "conservation", "cuts", "mesh_vtk", "field_vtk", "diagnostics"]
ALL_OUTPUTS: Tuple[str, ...] = ("line_cuts", "conservation", "cuts", "mesh_vtk", "field_vtk", "diagnostics")

Point = Tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DomainModel(_Strict):
    x_min: float = 0.0
    x_max: float = 1.0
    y_min: float = 0.0
    y_max: float = 1.0

    @model_validator(mode="after")
    def _positive_extent(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("domain must have positive width and height")
        return self

    def to_domain(self) -> Domain:
        return Domain(self.x_min, self.x_max, self.y_min, self.y_max)

    def contains(self, point: Sequence[float], tol: float = 1e-12) -> bool:
        x, y = point
        return self.x_min - tol <= x <= self.x_max + tol and self.y_min - tol <= y <= self.y_max + tol


class FractureModel(_Strict):
    start: Point
    end: Point
    thickness: PositiveFloat
    permeability: PositiveFloat
    kind: Literal["blocking", "conductive"]

    @model_validator(mode="after")
    def _distinct_endpoints(self):
        if tuple(self.start) == tuple(self.end):
            raise ValueError("fracture endpoints must be distinct")
        return self

    def to_spec(self) -> FractureSpec:
        return FractureSpec(start=self.start, end=self.end, thickness=self.thickness,
                            permeability=self.permeability, kind=FractureKind(self.kind))


class BoundaryConditionModel(_Strict):
    """Dirichlet pressure value or Neumann outward normal flux u·n."""
    type: Literal["dirichlet", "neumann"]
    value: float = 0.0


class PenaltyModel(_Strict):
    C_b: PositiveFloat = 1.0
    s_b: NonNegativeFloat = 0.0
    C_c: PositiveFloat = 1.0
    s_c: Optional[NonNegativeFloat] = None
    L: Optional[PositiveFloat] = None
    global_scale: PositiveFloat = 1.0

    def resolve(self, degree: int, default_length: float) -> PenaltyParams:
        s_c = PenaltyParams.default_s_c(degree) if self.s_c is None else self.s_c
        return PenaltyParams(C_b=self.C_b, s_b=self.s_b, C_c=self.C_c, s_c=s_c,
                             L=self.L or default_length, global_scale=self.global_scale)


# penalty table of the realistic-outcrop setting, keyed by degree
OUTCROP_TABLE: Dict[str, PenaltyModel] = {
    "0": PenaltyModel(C_b=1.0, s_b=2.0, C_c=6.0, s_c=2.0),
    "1": PenaltyModel(C_b=1.0, s_b=2.0, C_c=0.08, s_c=3.0),
    "2": PenaltyModel(C_b=1.0, s_b=2.0, C_c=0.16, s_c=3.0),
}
PENALTY_PRESETS = {"outcrop_table": OUTCROP_TABLE}


class PermeabilityOverride(_Strict):
    """K_m = value on cells whose centroid lies in the rectangle."""
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    value: PositiveFloat

    def contains(self, points: np.ndarray) -> np.ndarray:
        return ((points[:, 0] >= self.x_min) & (points[:, 0] <= self.x_max)
                & (points[:, 1] >= self.y_min) & (points[:, 1] <= self.y_max))


class MeshModel(_Strict):
    nx: PositiveInt = 10
    ny: PositiveInt = 10
    refine_steps: NonNegativeInt = 0


class LineCutModel(_Strict):
    start: Point
    end: Point
    samples: int = Field(DEFAULT_LINE_SAMPLES, ge=2)
    label: Optional[str] = None


class SolverModel(_Strict):
    method: Literal["cg", "cholesky", "direct"] = "cg"
    tol: PositiveFloat = SOLVER_TOLERANCE
    max_iter: Optional[PositiveInt] = None


class Scenario(_Strict):
    """
    Problem description of one run.

    Penalties resolve in this order: ``penalty_table`` entry for the degree,
    then ``penalty_preset``, then ``penalties``.
    """
    name: str = "scenario"
    description: str = ""
    domain: DomainModel = Field(default_factory=DomainModel)
    matrix_permeability: PositiveFloat = 1.0
    permeability_overrides: List[PermeabilityOverride] = Field(default_factory=list)
    fractures: List[FractureModel] = Field(default_factory=list)
    boundary: Dict[Literal["left", "right", "bottom", "top"], BoundaryConditionModel]
    source: Union[float, Literal["manufactured"]] = 0.0
    degree: int = Field(1, ge=0, le=2)
    penalties: PenaltyModel = Field(default_factory=PenaltyModel)
    penalty_table: Optional[Dict[Literal["0", "1", "2"], PenaltyModel]] = None
    penalty_preset: Optional[Literal["outcrop_table"]] = None
    mesh: MeshModel = Field(default_factory=MeshModel)
    line_cuts: List[LineCutModel] = Field(default_factory=list)
    outputs: List[OutputKind] = Field(default_factory=lambda: list(ALL_OUTPUTS))
    solver: SolverModel = Field(default_factory=SolverModel)
    allow_singular: bool = False

    @model_validator(mode="after")
    def _check_boundary_and_cuts(self):
        missing = [side for side in BOUNDARY_SIDES if side not in self.boundary]
        if missing:
            raise ValueError(f"missing boundary condition for side(s): {', '.join(missing)}")
        if not self.allow_singular and not any(bc.type == "dirichlet" for bc in self.boundary.values()):
            raise ValueError("at least one Dirichlet side is required (set allow_singular to opt out)")
        for index, cut in enumerate(self.line_cuts):
            if not (self.domain.contains(cut.start) and self.domain.contains(cut.end)):
                raise ValueError(f"line_cuts[{index}] must lie inside the domain")
        return self

    @property
    def characteristic_length(self) -> float:
        """L: explicit penalty L if given, else the domain diameter."""
        model = self.penalty_model(self.degree)
        return model.L or self.domain.to_domain().diameter

    @property
    def is_manufactured(self) -> bool:
        return self.source == MANUFACTURED

    def penalty_model(self, degree: int) -> PenaltyModel:
        key = str(degree)
        if self.penalty_table and key in self.penalty_table:
            return self.penalty_table[key]
        if self.penalty_preset:
            return PENALTY_PRESETS[self.penalty_preset][key]
        return self.penalties

    def penalty_params(self, degree: Optional[int] = None) -> PenaltyParams:
        degree = self.degree if degree is None else degree
        return self.penalty_model(degree).resolve(degree, self.domain.to_domain().diameter)

    def fracture_specs(self) -> List[FractureSpec]:
        return [fracture.to_spec() for fracture in self.fractures]

    def source_function(self) -> Callable[[np.ndarray], np.ndarray]:
        if self.is_manufactured:
            return manufactured_source
        if self.source == 0.0:
            return zero_source
        value = float(self.source)
        return lambda points: np.full(np.atleast_2d(points).shape[0], value)

    def cell_permeability(self, mesh: Mesh) -> np.ndarray:
        """K_m per cell; the last override containing the centroid wins."""
        permeability = np.full(mesh.num_cells, float(self.matrix_permeability))
        centroids = mesh.cell_centroids()
        for override in self.permeability_overrides:
            permeability[override.contains(centroids)] = override.value
        return permeability

    def boundary_data(self) -> Dict[str, BoundaryData]:
        return {side: BoundaryData(kind=bc.type, value=bc.value) for side, bc in self.boundary.items()}

    def problem_data(self, mesh: Mesh, fractures: Sequence[DiscreteFracture]) -> ProblemData:
        return ProblemData(permeability=self.cell_permeability(mesh), source=self.source_function(),
                           boundary=self.boundary_data(), fractures=tuple(fractures))

    def with_zero_data(self) -> "Scenario":
        """Copy with f = 0 and every boundary value set to 0."""
        boundary = {side: BoundaryConditionModel(type=bc.type, value=0.0) for side, bc in self.boundary.items()}
        return self.model_copy(update={"source": 0.0, "boundary": boundary})
