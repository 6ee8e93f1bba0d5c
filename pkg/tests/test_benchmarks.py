import sys
import unittest
from pathlib import Path

import numpy as np
import numpy.testing as npt

# Add the parent directory to the path
sys.path.append(str(Path(__file__).resolve().parent.parent))

from app.main import RunOptions, SimulationManager, parse_penalties, run_convergence
from app.postprocess import diagnostics
from app.scenarios.builtins import builtin_example1, builtin_manufactured
from app.scenarios.models import BoundaryConditionModel
from app.solver.linsolve import solve_spd

# C_b, s_b, C_c, s_c, L
REFERENCE_PENALTIES = "1,0,1,3,1"


def solve(scenario, **options):
    options.setdefault("write_outputs", False)
    options.setdefault("solver", "direct")
    return SimulationManager(scenario, RunOptions(**options)).solve()


def inflow(result) -> float:
    return -result.report["flux_left"]


def line_difference(a, b) -> float:
    return float(np.sqrt(np.mean((a.values - b.values) ** 2)))


class TestUniqueness(unittest.TestCase):
    """
    Zero data gives the zero solution on the fractured meshes.
    """

    def test_zero_data_zero_solution(self):
        dirichlet = BoundaryConditionModel(type="dirichlet", value=0.0)
        for variant in ("conductive", "blocking"):
            scenario = builtin_example1(variant).model_copy(
                update={"boundary": {side: dirichlet for side in ("left", "right", "bottom", "top")}})
            for degree in range(3):
                result = solve(scenario, degree=degree, refine_steps=1, solver="cg")
                self.assertLess(result.report["solution_norm"], 1e-10, f"{variant}, degree {degree}")


class TestExample1Identities(unittest.TestCase):
    """
    Conservation and the energy identity hold on both fractured examples for every degree.
    """

    def test_conservation_and_energy(self):
        for variant in ("conductive", "blocking"):
            for degree in range(3):
                report = solve(builtin_example1(variant), degree=degree, refine_steps=3).report
                label = f"{variant}, degree {degree}"
                self.assertLess(report["max_conservation_residual"], 1e-9 * report["scale"], label)
                self.assertLess(report["relative_energy_residual"], 1e-9, label)
                self.assertLess(abs(report["global_balance"]), 1e-9 * report["scale"], label)
                self.assertLess(report["symmetry_defect"], 1e-8, label)


class TestConvergenceRates(unittest.TestCase):
    """
    Observed orders on the manufactured problem, from the last two meshes.
    """

    def test_degree_one(self):
        rows = run_convergence(1, meshes=(8, 16, 32, 64), options=RunOptions(solver="direct"))
        self.assertGreaterEqual(rows[-1]["order_u"], 1.8)
        self.assertGreaterEqual(rows[-1]["order_p_star"], 2.8)
        self.assertGreaterEqual(rows[-1]["order_p"], 1.8)

    def test_degree_zero(self):
        rows = run_convergence(0, meshes=(8, 16, 32, 64), options=RunOptions(solver="direct"))
        self.assertGreaterEqual(rows[-1]["order_u"], 0.8)

    def test_errors_shrink(self):
        rows = run_convergence(2, meshes=(4, 8), options=RunOptions(solver="direct"))
        self.assertLess(rows[1]["error_u"], rows[0]["error_u"] / 4.0)


class TestFractureEffect(unittest.TestCase):
    """
    Conductive fractures raise and blocking fractures lower the inflow through the left side.
    """

    @classmethod
    def setUpClass(cls):
        penalties = parse_penalties(REFERENCE_PENALTIES)
        conductive = builtin_example1("conductive")
        cls.no_fractures = solve(conductive.model_copy(update={"fractures": []}), penalties=penalties)
        cls.conductive = solve(conductive, penalties=penalties)
        cls.blocking = solve(builtin_example1("blocking"), penalties=penalties)
        cls.weak = solve(conductive, penalties=parse_penalties("1,0,1,1,1"))

    def test_fracture_free_inflow(self):
        npt.assert_allclose(inflow(self.no_fractures), 1.0, rtol=1e-9)

    def test_fracture_free_inflow_degree_two(self):
        scenario = builtin_example1("conductive").model_copy(update={"fractures": []})
        npt.assert_allclose(inflow(solve(scenario, degree=2)), 1.0, rtol=1e-9)

    def test_ordering(self):
        reference = inflow(self.no_fractures)
        self.assertGreater(inflow(self.conductive), 1.05 * reference)
        self.assertLess(inflow(self.blocking), 0.98 * reference)

    def test_weak_penalty_matches_fracture_free(self):
        npt.assert_allclose(inflow(self.weak), inflow(self.no_fractures), rtol=0.02)

    def test_stronger_penalty_captures_conductive_fractures(self):
        self.assertGreater(inflow(self.conductive), inflow(self.weak))

    def test_global_balance(self):
        for result in (self.conductive, self.blocking, self.weak):
            fluxes = diagnostics.boundary_fluxes(result.solution)
            self.assertLess(abs(fluxes["left"] + fluxes["right"]), 1e-9)


class TestExample1Symmetry(unittest.TestCase):
    """
    Example 1 is symmetric under x -> 1 - x with p -> 1 - p.
    """

    def test_line_symmetry(self):
        for variant in ("conductive", "blocking"):
            solution = solve(builtin_example1(variant)).solution
            # an even count keeps the fracture tip at (0.5, 0.25) off the samples
            sample = diagnostics.sample_line(solution, (0.0, 0.25), (1.0, 0.25), 200)
            defect = np.abs(sample.values + sample.values[::-1] - 1.0)
            self.assertLess(defect.max(), 5e-3, variant)


class TestSelfConvergence(unittest.TestCase):
    """
    The x = 0.5 line cut settles under refinement near the fractures.
    """

    def test_line_cut_differences_shrink(self):
        scenario = builtin_example1("conductive")
        cut = scenario.line_cuts[0]
        samples = {}
        for steps in (0, 2, 4):
            solution = solve(scenario, refine_steps=steps, penalties=parse_penalties(REFERENCE_PENALTIES)).solution
            samples[steps] = diagnostics.sample_line(solution, cut.start, cut.end, cut.samples)
        coarse = line_difference(samples[0], samples[2])
        self.assertLessEqual(2.0 * line_difference(samples[2], samples[4]), coarse)


class TestCondensedSystems(unittest.TestCase):
    """
    Conjugate gradients agree with dense Cholesky on assembled systems.
    """

    def test_cg_matches_cholesky(self):
        for scenario in (builtin_manufactured(), builtin_example1("blocking")):
            system = solve(scenario, nx=6, ny=6, refine_steps=0).system
            self.assertLessEqual(system.num_dofs, 500)
            system.verify_spd()
            cg = solve_spd(system.matrix, system.rhs, method="cg")
            cholesky = solve_spd(system.matrix, system.rhs, method="cholesky")
            scale = max(1.0, np.abs(cholesky.solution).max())
            npt.assert_allclose(cg.solution, cholesky.solution, atol=1e-9 * scale)


if __name__ == "__main__":
    unittest.main()
