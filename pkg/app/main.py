import argparse
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import linregress
from tqdm import tqdm

# Add parent directory to path
sys.path.append(str(Path(__file__).resolve().parent.parent))

from app.config.settings import APP_NAME, APP_VERSION, CONVERGENCE_MESHES, LOG_FILE, LOG_LEVEL, OUTPUT_DIRECTORY
from app.geometry.fractures import CellClassification, DiscreteFracture, classify_cells, discretize_fracture
from app.mesh.triangulation import Mesh, build_uniform_triangulation, refine_near_fractures
from app.postprocess import diagnostics
from app.postprocess.solution import HDGSolution
from app.scenarios.builtins import BUILTINS, builtin_manufactured, get_builtin
from app.scenarios.loader import load_scenario
from app.scenarios.manufactured import manufactured_pressure, manufactured_velocity
from app.scenarios.models import MeshModel, PenaltyModel, Scenario, SolverModel
from app.solver.assembly import CondensedSystem, assemble, recover
from app.solver.linsolve import SolverResult, solve_spd
from app.utils.csv_processor import CSVProcessor
from app.utils.errors import ConfigurationError, HDGError, exit_code_for
from app.utils.vtk_writer import write_field_vtk, write_mesh_vtk


@dataclass
class RunOptions:
    """
    Command line overrides applied on top of a scenario.

    Attributes:
    -----------
    degree, refine_steps, nx, ny : Optional[int]
        Replace the scenario values when given.
    tol : Optional[float]
        Relative residual target of the linear solver.
    solver : Optional[str]
        "cg", "cholesky" or "direct".
    penalties : Optional[PenaltyModel]
        Replaces every penalty source of the scenario.
    zero_data : bool
        Set f and all boundary data to zero.
    out : str
        Output directory.
    write_outputs : bool
        Write the files listed in the scenario outputs.
    show_progress : bool
        Show tqdm progress bars.
    """
    degree: Optional[int] = None
    refine_steps: Optional[int] = None
    nx: Optional[int] = None
    ny: Optional[int] = None
    tol: Optional[float] = None
    solver: Optional[str] = None
    penalties: Optional[PenaltyModel] = None
    zero_data: bool = False
    out: str = OUTPUT_DIRECTORY
    write_outputs: bool = True
    show_progress: bool = False


@dataclass
class RunResult:
    scenario: Scenario
    mesh: Mesh
    fractures: List[DiscreteFracture]
    classification: CellClassification
    system: CondensedSystem
    solver_result: SolverResult
    solution: HDGSolution
    report: Dict[str, Any] = field(default_factory=dict)
    files: List[str] = field(default_factory=list)


def parse_penalties(text: str) -> PenaltyModel:
    """
    Parse "Cb,sb,Cc,sc[,L]".

    Raises:
    -------
    ConfigurationError
        On a wrong number of values or non-numeric values.
    """
    parts = [part.strip() for part in text.split(",")]
    if len(parts) not in (4, 5):
        raise ConfigurationError("--penalties expects Cb,sb,Cc,sc[,L]", {"value": text})
    try:
        values = [float(part) for part in parts]
    except ValueError as exc:
        raise ConfigurationError("--penalties values must be numbers", {"value": text}) from exc
    keys = ["C_b", "s_b", "C_c", "s_c", "L"][:len(values)]
    try:
        return PenaltyModel(**dict(zip(keys, values)))
    except ValueError as exc:
        raise ConfigurationError(f"Invalid --penalties: {exc}", {"value": text}) from exc


def apply_overrides(scenario: Scenario, options: RunOptions) -> Scenario:
    """Scenario with the command line overrides applied."""
    update: Dict[str, Any] = {}
    if options.degree is not None:
        if options.degree not in (0, 1, 2):
            raise ConfigurationError("degree must be 0, 1 or 2", {"degree": options.degree})
        update["degree"] = options.degree
    mesh_update = {key: getattr(options, key) for key in ("nx", "ny", "refine_steps")
                   if getattr(options, key) is not None}
    if mesh_update:
        if any(value < (0 if key == "refine_steps" else 1) for key, value in mesh_update.items()):
            raise ConfigurationError("Invalid mesh override", mesh_update)
        update["mesh"] = MeshModel(**{**scenario.mesh.model_dump(), **mesh_update})
    solver_update = {key: value for key, value in (("tol", options.tol), ("method", options.solver))
                     if value is not None}
    if solver_update:
        try:
            update["solver"] = SolverModel(**{**scenario.solver.model_dump(), **solver_update})
        except ValueError as exc:
            raise ConfigurationError(f"Invalid solver override: {exc}", solver_update) from exc
    if options.penalties is not None:
        penalties = options.penalties
        if penalties.L is None:
            current = scenario.penalty_model(update.get("degree", scenario.degree))
            penalties = penalties.model_copy(update={"L": current.L})
        update.update(penalties=penalties, penalty_table=None, penalty_preset=None)
    scenario = scenario.model_copy(update=update) if update else scenario
    if options.zero_data:
        scenario = scenario.with_zero_data()
    return scenario


class SimulationManager:
    """
    Runs one scenario through the pipeline: mesh, refinement, fracture
    discretization, classification, assembly, solve, recovery, postprocessing
    and output.
    """

    def __init__(self, scenario: Scenario, options: Optional[RunOptions] = None):
        self.options = options or RunOptions()
        self.scenario = apply_overrides(scenario, self.options)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Attach the scenario name and stage to errors raised inside the block."""
        logger.debug(f"[{self.scenario.name}] stage '{name}'")
        try:
            yield
        except HDGError as error:
            error.with_context(scenario=self.scenario.name, stage=name)
            logger.error(f"[{self.scenario.name}] {name} failed: {error}")
            raise

    def build_mesh(self) -> Mesh:
        scenario = self.scenario
        with self.stage("mesh"):
            mesh = build_uniform_triangulation(scenario.mesh.nx, scenario.mesh.ny, scenario.domain.to_domain())
            logger.info(f"Background mesh {scenario.mesh.nx}x{scenario.mesh.ny}: {mesh.num_cells} cells")
        with self.stage("refine"):
            mesh = refine_near_fractures(mesh, scenario.fracture_specs(), scenario.mesh.refine_steps,
                                         characteristic_length=scenario.characteristic_length,
                                         show_progress=self.options.show_progress)
        return mesh

    def classify(self, mesh: Mesh) -> Tuple[List[DiscreteFracture], CellClassification]:
        with self.stage("classify"):
            length = self.scenario.characteristic_length
            fractures = [discretize_fracture(spec, mesh, length) for spec in self.scenario.fracture_specs()]
            classification = classify_cells(mesh, fractures)
            logger.info(f"Cell classes: {classification.counts()}, {classification.num_cuts} cut segments")
        return fractures, classification

    def solve(self) -> RunResult:
        """
        Run the pipeline up to the postprocessed solution and the diagnostics report.

        Returns:
        --------
        RunResult
            All intermediate objects plus the report.
        """
        scenario = self.scenario
        started = time.perf_counter()
        mesh = self.build_mesh()
        fractures, classification = self.classify(mesh)

        with self.stage("assemble"):
            problem = scenario.problem_data(mesh, fractures)
            system = assemble(mesh, classification, problem, scenario.penalty_params(), scenario.degree,
                              show_progress=self.options.show_progress)
            system.verify_spd()

        with self.stage("solve"):
            solver = scenario.solver
            solver_result = solve_spd(system.matrix, system.rhs, tol=solver.tol, max_iter=solver.max_iter,
                                      method=solver.method, verify=False)
            logger.info(f"Solved {system.num_dofs} facet DOFs with {solver_result.method}: "
                        f"{solver_result.iterations} iterations, residual {solver_result.residual_norm:.3e}")

        with self.stage("recover"):
            solution = recover(system, solver_result.solution)
            solution.scenario_name = scenario.name

        with self.stage("postprocess"):
            diagnostics.postprocess_pressure(solution)
            result = RunResult(scenario=scenario, mesh=mesh, fractures=fractures, classification=classification,
                               system=system, solver_result=solver_result, solution=solution)
            result.report = self.build_report(result, time.perf_counter() - started)
        return result

    def build_report(self, result: RunResult, wall_time: float) -> Dict[str, Any]:
        solution = result.solution
        residuals = diagnostics.conservation_residuals(solution)
        fluxes = diagnostics.boundary_fluxes(solution)
        scale = diagnostics.data_scale(solution)
        energy_residual = diagnostics.energy_residual(solution)
        report: Dict[str, Any] = {
            "scenario": result.scenario.name,
            "degree": result.scenario.degree,
            "cells": result.mesh.num_cells,
            "facets": result.mesh.num_facets,
            "h_min": float(result.mesh.cell_diameters.min()),
            "h_max": float(result.mesh.cell_diameters.max()),
        }
        report.update({f"cells_{name}": count for name, count in result.classification.counts().items()})
        report.update({
            "cut_segments": result.classification.num_cuts,
            "fracture_band_cells": int(result.classification.fracture_band().size),
            "free_dofs": result.system.num_dofs,
            "dirichlet_dofs": int(result.system.dirichlet_dofs.size),
            "matrix_nnz": int(result.system.matrix.nnz),
            "symmetry_defect": result.system.symmetry_defect(),
            "solver": result.solver_result.method,
            "solver_iterations": result.solver_result.iterations,
            "solver_residual": result.solver_result.residual_norm,
            "scale": scale,
            "energy": diagnostics.energy_norm(solution),
            "energy_residual": energy_residual,
            "relative_energy_residual": abs(energy_residual) / scale,
            "max_conservation_residual": float(np.abs(residuals).max()) if residuals.size else 0.0,
            "global_balance": diagnostics.global_balance(solution),
        })
        report.update({f"flux_{tag}": value for tag, value in fluxes.items()})
        report["solution_norm"] = solution.coefficient_norm()
        report["wall_time_s"] = wall_time
        return report

    def write_outputs(self, result: RunResult) -> List[str]:
        """Write the artifacts listed in the scenario outputs to the output directory."""
        out = self.options.out
        outputs = set(result.scenario.outputs)
        files: List[str] = []
        with self.stage("output"):
            os.makedirs(out, exist_ok=True)
            if "line_cuts" in outputs:
                names = CSVProcessor.line_cut_names(len(result.scenario.line_cuts))
                for cut, name in zip(result.scenario.line_cuts, names):
                    sample = diagnostics.sample_line(result.solution, cut.start, cut.end, cut.samples)
                    files.append(CSVProcessor.export_line_cut(sample, os.path.join(out, name)))
            if "conservation" in outputs:
                residuals = diagnostics.conservation_residuals(result.solution)
                files.append(CSVProcessor.export_conservation(residuals, os.path.join(out, "conservation.csv")))
            if "cuts" in outputs:
                files.append(CSVProcessor.export_cuts(result.classification, os.path.join(out, "cuts.csv")))
            if "mesh_vtk" in outputs:
                files.append(write_mesh_vtk(result.mesh, result.classification, os.path.join(out, "mesh.vtk")))
            if "field_vtk" in outputs:
                files.append(write_field_vtk(result.solution, os.path.join(out, "field.vtk")))
            if "diagnostics" in outputs:
                files.append(write_report(result.report, os.path.join(out, "diagnostics.txt")))
        logger.info(f"Wrote {len(files)} output files to {out}")
        result.files = files
        return files

    def run(self) -> RunResult:
        result = self.solve()
        if self.options.write_outputs:
            self.write_outputs(result)
        return result


def write_report(report: Dict[str, Any], file_path: str) -> str:
    """Diagnostics as "key: value" lines."""
    lines = [f"{key}: {_format_value(value)}" for key, value in report.items()]
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    return file_path


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6e}"
    return str(value)


def observed_orders(h: Sequence[float], errors: Sequence[float]) -> List[float]:
    """Slopes log(e_i / e_{i-1}) / log(h_i / h_{i-1}); NaN for the first mesh."""
    orders = [float("nan")]
    for i in range(1, len(h)):
        if errors[i] > 0.0 and errors[i - 1] > 0.0:
            orders.append(float(np.log(errors[i] / errors[i - 1]) / np.log(h[i] / h[i - 1])))
        else:
            orders.append(float("nan"))
    return orders


def fitted_order(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)."""
    return float(linregress(np.log(h), np.log(errors)).slope)


def run_convergence(degree: int,
                    meshes: Sequence[int] = CONVERGENCE_MESHES,
                    options: Optional[RunOptions] = None,
                    scenario: Optional[Scenario] = None) -> List[Dict[str, float]]:
    """
    Solve the manufactured problem on nx = ny = n for each n in ``meshes``.

    Returns:
    --------
    List[Dict[str, float]]
        Rows with n, h, the L² errors of u_h, p*_h and p_h, and the observed orders.
    """
    scenario = scenario or builtin_manufactured()
    if not scenario.is_manufactured or scenario.fractures:
        raise ConfigurationError("Convergence mode needs the fracture-free manufactured problem",
                                 {"scenario": scenario.name})
    base = options or RunOptions()
    rows: List[Dict[str, float]] = []
    for n in tqdm(meshes, desc="convergence", disable=not base.show_progress):
        run_options = RunOptions(degree=degree, nx=n, ny=n, refine_steps=0, tol=base.tol, solver=base.solver,
                                 penalties=base.penalties, write_outputs=False)
        result = SimulationManager(scenario, run_options).solve()
        solution = result.solution
        rows.append({
            "n": n,
            "h": float(result.mesh.cell_diameters.max()),
            "error_u": diagnostics.l2_error_velocity(solution, manufactured_velocity, "u"),
            "error_p_star": diagnostics.l2_error(solution, manufactured_pressure, "p_star"),
            "error_p": diagnostics.l2_error(solution, manufactured_pressure, "p"),
        })
        logger.info(f"n={n}: |u-u_h|={rows[-1]['error_u']:.3e}, |p-p*|={rows[-1]['error_p_star']:.3e}")

    h = [row["h"] for row in rows]
    for name in ("u", "p_star", "p"):
        for row, order in zip(rows, observed_orders(h, [row[f"error_{name}"] for row in rows])):
            row[f"order_{name}"] = order
    return rows


def format_convergence_table(rows: Sequence[Dict[str, float]], degree: int) -> str:
    header = f"{'n':>5} {'h':>10} {'|u-u_h|':>11} {'rate':>6} {'|p-p*|':>11} {'rate':>6} {'|p-p_h|':>11} {'rate':>6}"
    lines = [f"Convergence, degree {degree}", header]
    for row in rows:
        lines.append(f"{row['n']:>5d} {row['h']:>10.4e} {row['error_u']:>11.4e} {row['order_u']:>6.2f} "
                     f"{row['error_p_star']:>11.4e} {row['order_p_star']:>6.2f} "
                     f"{row['error_p']:>11.4e} {row['order_p']:>6.2f}")
    if len(rows) >= 2:
        h = [row["h"] for row in rows]
        fits = ", ".join(f"{name}={fitted_order(h, [row[f'error_{name}'] for row in rows]):.2f}"
                         for name in ("u", "p_star", "p"))
        lines.append(f"least-squares orders: {fits}")
    return "\n".join(lines)


def configure_logging(level: str = LOG_LEVEL, quiet: bool = False, log_file: str = LOG_FILE) -> None:
    """stderr sink at ``level`` (WARNING when quiet) plus a rotating file sink."""
    logger.remove()
    logger.add(sys.stderr, level="WARNING" if quiet else level)
    directory = os.path.dirname(log_file)
    if directory:
        os.makedirs(directory, exist_ok=True)
    logger.add(log_file, level="DEBUG", rotation="10 MB", retention="7 days")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description=f"{APP_NAME} v{APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="Run a scenario")
    source = run_parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--scenario", type=str, help="Path to a JSON scenario file")
    source.add_argument("--builtin", choices=sorted(BUILTINS), help="Name of a built-in scenario")
    run_parser.add_argument("--degree", type=int, choices=(0, 1, 2), help="Polynomial degree k")
    run_parser.add_argument("--refine-steps", type=int, help="Refinement rounds near fractures")
    run_parser.add_argument("--nx", type=int, help="Background mesh cells in x")
    run_parser.add_argument("--ny", type=int, help="Background mesh cells in y")
    run_parser.add_argument("--out", type=str, default=OUTPUT_DIRECTORY, help="Output directory")
    run_parser.add_argument("--convergence", action="store_true",
                            help="Run the manufactured convergence study instead of the scenario")
    run_parser.add_argument("--tol", type=float, help="Relative residual tolerance of the linear solver")
    run_parser.add_argument("--solver", choices=("cg", "cholesky", "direct"), help="Linear solver")
    run_parser.add_argument("--penalties", type=str, help="Penalty override Cb,sb,Cc,sc[,L]")
    run_parser.add_argument("--zero-data", action="store_true", help="Zero source and boundary data")
    run_parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors to stderr")

    subparsers.add_parser("list-builtins", help="List the built-in scenarios")
    return parser


def _run_command(args: argparse.Namespace) -> int:
    options = RunOptions(degree=args.degree, refine_steps=args.refine_steps, nx=args.nx, ny=args.ny,
                         tol=args.tol, solver=args.solver,
                         penalties=parse_penalties(args.penalties) if args.penalties else None,
                         zero_data=args.zero_data, out=args.out, show_progress=not args.quiet and sys.stderr.isatty())
    scenario = load_scenario(args.scenario) if args.scenario else get_builtin(args.builtin)

    if args.convergence:
        degree = args.degree if args.degree is not None else scenario.degree
        manufactured = scenario if scenario.is_manufactured and not scenario.fractures else None
        rows = run_convergence(degree, options=options, scenario=manufactured)
        print(format_convergence_table(rows, degree))
        path = CSVProcessor.export_convergence(rows, os.path.join(args.out, "convergence.csv"))
        logger.info(f"Wrote convergence table to {path}")
        return 0

    result = SimulationManager(scenario, options).run()
    report = result.report
    print(f"{result.scenario.name}: {report['cells']} cells, {report['free_dofs']} DOFs, "
          f"max conservation residual {report['max_conservation_residual']:.3e}, "
          f"energy residual {report['energy_residual']:.3e}")
    if args.zero_data:
        print(f"solution norm: {report['solution_norm']:.3e}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Command line entry point.

    Returns:
    --------
    int
        0 on success, 2 for configuration errors, 3 for numerical errors, 1 otherwise.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(quiet=getattr(args, "quiet", False))

    if args.command == "list-builtins":
        for name in sorted(BUILTINS):
            scenario = get_builtin(name)
            print(f"{name:<14} {scenario.description}")
        return 0

    try:
        return _run_command(args)
    except HDGError as error:
        logger.error(f"{type(error).__name__}: {error}")
        return exit_code_for(error)
    except KeyboardInterrupt:
        logger.info("Run interrupted by user")
        return 1
    except Exception as error:
        logger.exception(f"Unexpected error: {error}")
        return exit_code_for(error)


if __name__ == "__main__":
    sys.exit(main())
