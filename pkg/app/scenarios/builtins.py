"""
Built-in scenarios.
"""
from typing import Callable, Dict

from app.scenarios.models import (BoundaryConditionModel, DomainModel, FractureModel, LineCutModel, MANUFACTURED,
                                  MeshModel, PenaltyModel, Scenario)
from app.utils.errors import ConfigurationError

EXAMPLE1_THICKNESS = 1e-3
EXAMPLE1_PERMEABILITY = {"conductive": 1e3, "blocking": 1e-3}


def _no_flow() -> BoundaryConditionModel:
    return BoundaryConditionModel(type="neumann", value=0.0)


def builtin_example1(variant: str) -> Scenario:
    """
    Two crossing fractures of length 0.5 in the unit square.

    Parameters:
    -----------
    variant : str
        "conductive" (k = 1e3) or "blocking" (k = 1e-3).

    Returns:
    --------
    Scenario
        p = 1 on the left, p = 0 on the right, no flow on top and bottom, f = 0,
        K_m = 1, L = 1 and a 200-sample line cut along x = 0.5.
    """
    if variant not in EXAMPLE1_PERMEABILITY:
        raise ConfigurationError(f"Unknown example1 variant '{variant}'", {"variants": sorted(EXAMPLE1_PERMEABILITY)})
    permeability = EXAMPLE1_PERMEABILITY[variant]
    fractures = [
        FractureModel(start=(0.25, 0.5), end=(0.75, 0.5), thickness=EXAMPLE1_THICKNESS,
                      permeability=permeability, kind=variant),
        FractureModel(start=(0.5, 0.25), end=(0.5, 0.75), thickness=EXAMPLE1_THICKNESS,
                      permeability=permeability, kind=variant),
    ]
    suffix = "a" if variant == "conductive" else "b"
    return Scenario(
        name=f"example1{suffix}",
        description=f"Two {variant} fractures crossing at the centre of the unit square",
        domain=DomainModel(),
        matrix_permeability=1.0,
        fractures=fractures,
        boundary={
            "left": BoundaryConditionModel(type="dirichlet", value=1.0),
            "right": BoundaryConditionModel(type="dirichlet", value=0.0),
            "bottom": _no_flow(),
            "top": _no_flow(),
        },
        source=0.0,
        degree=1,
        penalties=PenaltyModel(L=1.0),
        mesh=MeshModel(nx=10, ny=10, refine_steps=3),
        line_cuts=[LineCutModel(start=(0.5, 0.0), end=(0.5, 1.0), samples=200, label="x=0.5")],
    )


def builtin_manufactured() -> Scenario:
    """Fracture-free unit square with p = sin(pi x) sin(pi y) and homogeneous Dirichlet data."""
    dirichlet = BoundaryConditionModel(type="dirichlet", value=0.0)
    return Scenario(
        name=MANUFACTURED,
        description="Smooth manufactured solution p = sin(pi x) sin(pi y), no fractures",
        boundary={side: dirichlet for side in ("left", "right", "bottom", "top")},
        source=MANUFACTURED,
        degree=1,
        penalties=PenaltyModel(L=1.0),
        mesh=MeshModel(nx=8, ny=8, refine_steps=0),
        line_cuts=[LineCutModel(start=(0.0, 0.5), end=(1.0, 0.5), samples=200, label="y=0.5")],
    )


BUILTINS: Dict[str, Callable[[], Scenario]] = {
    "example1a": lambda: builtin_example1("conductive"),
    "example1b": lambda: builtin_example1("blocking"),
    MANUFACTURED: builtin_manufactured,
}


def get_builtin(name: str) -> Scenario:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigurationError(f"Unknown built-in scenario '{name}'", {"builtins": sorted(BUILTINS)}) from None
