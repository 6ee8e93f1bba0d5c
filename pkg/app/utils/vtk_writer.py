"""
Legacy ASCII VTK output through meshio.
"""
import os
from pathlib import Path
from typing import Dict, Optional, Union

import meshio
import numpy as np
from loguru import logger

from app.geometry.fractures import CellClassification
from app.mesh.triangulation import Mesh
from app.postprocess.solution import HDGSolution

PathLike = Union[str, Path]


def to_meshio(mesh: Mesh, cell_data: Optional[Dict[str, np.ndarray]] = None) -> meshio.Mesh:
    points = np.column_stack([mesh.vertices, np.zeros(mesh.num_vertices)])
    data = {name: [np.asarray(values, dtype=float)] for name, values in (cell_data or {}).items()}
    return meshio.Mesh(points, [("triangle", np.asarray(mesh.cells))], cell_data=data)


def write_vtk(mesh: Mesh, file_path: PathLike, cell_data: Optional[Dict[str, np.ndarray]] = None) -> str:
    """
    Write the triangulation with per-cell arrays as legacy ASCII VTK.

    Parameters:
    -----------
    mesh : Mesh
        The triangulation.
    file_path : PathLike
        Output path.
    cell_data : Optional[Dict[str, np.ndarray]]
        Name -> (nc,) array.

    Returns:
    --------
    str
        Path of the written file.
    """
    file_path = str(file_path)
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    meshio.write(file_path, to_meshio(mesh, cell_data), file_format="vtk", binary=False)
    logger.debug(f"Wrote VTK with {mesh.num_cells} cells to {file_path}")
    return file_path


def write_mesh_vtk(mesh: Mesh, classification: CellClassification, file_path: PathLike) -> str:
    return write_vtk(mesh, file_path, {"cell_class": classification.class_of.astype(float),
                                       "stabilization_class": classification.stabilization_class.astype(float),
                                       "h": mesh.cell_diameters})


def write_field_vtk(solution: HDGSolution, file_path: PathLike) -> str:
    """Cell means of p*_h and p_h, |u_h| at centroids, and the cell class."""
    velocity = solution.centroid_velocity()
    return write_vtk(solution.mesh, file_path, {
        "p_star": solution.cell_mean_p_star(),
        "p": solution.cell_mean_pressure(),
        "velocity_magnitude": np.hypot(velocity[:, 0], velocity[:, 1]),
        "cell_class": solution.classification.class_of.astype(float),
    })
