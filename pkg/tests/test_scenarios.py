import json
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import numpy.testing as npt

# Add the parent directory to the path
sys.path.append(str(Path(__file__).resolve().parent.parent))

from app.config.settings import SCENARIO_DIRECTORY
from app.geometry.fractures import FractureKind
from app.mesh.triangulation import Domain, build_uniform_triangulation
from app.scenarios.builtins import BUILTINS, builtin_example1, builtin_manufactured, get_builtin
from app.scenarios.loader import dump_scenario, load_scenario, parse_scenario, save_scenario
from app.scenarios.manufactured import manufactured_source
from app.scenarios.models import PenaltyModel, Scenario
from app.utils.errors import ConfigurationError

MINIMAL = {
    "boundary": {
        "left": {"type": "dirichlet", "value": 1.0},
        "right": {"type": "dirichlet", "value": 0.0},
        "bottom": {"type": "neumann"},
        "top": {"type": "neumann"},
    }
}


def _scenario(**fields) -> Scenario:
    return Scenario.model_validate({**MINIMAL, **fields})


class TestScenarioFiles(unittest.TestCase):
    """
    Test loading, saving and the shipped scenario files.
    """

    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_round_trip(self):
        for name in BUILTINS:
            scenario = get_builtin(name)
            path = save_scenario(scenario, Path(self.temp_dir.name) / f"{name}.json")
            loaded = load_scenario(path)
            self.assertEqual(loaded.model_dump(), scenario.model_dump())
            self.assertEqual(dump_scenario(loaded), dump_scenario(scenario))

    def test_shipped_example_files_match_builtins(self):
        for name, variant in (("example1a", "conductive"), ("example1b", "blocking")):
            loaded = load_scenario(Path(SCENARIO_DIRECTORY) / f"{name}.json")
            self.assertEqual(loaded.model_dump(), builtin_example1(variant).model_dump())

    def test_example1_data(self):
        conductive = load_scenario(Path(SCENARIO_DIRECTORY) / "example1a.json")
        blocking = load_scenario(Path(SCENARIO_DIRECTORY) / "example1b.json")
        self.assertEqual(len(conductive.fractures), 2)
        self.assertTrue(all(f.permeability == 1e3 and f.kind == "conductive" for f in conductive.fractures))
        self.assertTrue(all(f.permeability == 1e-3 and f.kind == "blocking" for f in blocking.fractures))
        self.assertEqual([f.start for f in conductive.fractures], [f.start for f in blocking.fractures])
        self.assertEqual(conductive.characteristic_length, 1.0)

    def test_templates_load(self):
        network = load_scenario(Path(SCENARIO_DIRECTORY) / "network_template.json")
        self.assertEqual({f.kind for f in network.fractures}, {"blocking", "conductive"})
        self.assertEqual(network.penalty_params(0).s_c, 2.0)
        self.assertEqual(network.penalty_params(1).s_c, 3.0)

        outcrop = load_scenario(Path(SCENARIO_DIRECTORY) / "outcrop_template.json")
        self.assertEqual((outcrop.mesh.nx, outcrop.mesh.ny, outcrop.mesh.refine_steps), (100, 86, 2))
        params = outcrop.penalty_params(1)
        self.assertEqual((params.C_b, params.s_b, params.C_c, params.s_c), (1.0, 2.0, 0.08, 3.0))
        self.assertAlmostEqual(params.L, np.hypot(1.0, 6.0 / 7.0))
        self.assertEqual(len(outcrop.line_cuts), 2)

    def test_missing_file(self):
        with self.assertRaises(ConfigurationError):
            load_scenario(Path(self.temp_dir.name) / "missing.json")

    def test_parse_error_position(self):
        with self.assertRaises(ConfigurationError) as context:
            parse_scenario('{\n  "name": "broken",\n  "degree": ,\n}')
        self.assertEqual(context.exception.context["line"], 3)
        self.assertEqual(context.exception.context["column"], 13)

    def test_validation_error_names_field(self):
        text = json.dumps({**MINIMAL, "mesh": {"nx": 0}})
        with self.assertRaises(ConfigurationError) as context:
            parse_scenario(text)
        self.assertEqual(context.exception.context["field"], "mesh.nx")


class TestScenarioValidation(unittest.TestCase):
    """
    Test the scenario model rules.
    """

    def test_defaults(self):
        scenario = _scenario()
        self.assertEqual(scenario.degree, 1)
        self.assertEqual(scenario.penalty_params().s_c, 3.0)
        self.assertAlmostEqual(scenario.characteristic_length, np.sqrt(2.0))

    def test_missing_side(self):
        data = {"boundary": {key: value for key, value in MINIMAL["boundary"].items() if key != "top"}}
        with self.assertRaises(ConfigurationError) as context:
            parse_scenario(json.dumps(data))
        self.assertIn("top", str(context.exception))

    def test_pure_neumann_needs_opt_in(self):
        boundary = {side: {"type": "neumann"} for side in ("left", "right", "bottom", "top")}
        with self.assertRaises(ConfigurationError):
            parse_scenario(json.dumps({"boundary": boundary}))
        scenario = parse_scenario(json.dumps({"boundary": boundary, "allow_singular": True}))
        self.assertTrue(scenario.allow_singular)

    def test_rejects_bad_values(self):
        for update in ({"degree": 3}, {"matrix_permeability": 0.0}, {"unknown_field": 1},
                       {"line_cuts": [{"start": [0.0, 0.5], "end": [1.5, 0.5]}]},
                       {"fractures": [{"start": [0.1, 0.1], "end": [0.1, 0.1], "thickness": 1e-3,
                                       "permeability": 1.0, "kind": "blocking"}]}):
            with self.assertRaises(ConfigurationError, msg=str(update)):
                parse_scenario(json.dumps({**MINIMAL, **update}))

    def test_penalty_precedence(self):
        table = {"1": {"C_b": 5.0}}
        scenario = _scenario(penalties={"C_b": 2.0}, penalty_preset="outcrop_table", penalty_table=table)
        self.assertEqual(scenario.penalty_params(1).C_b, 5.0)
        self.assertEqual(scenario.penalty_params(2).C_c, 0.16)
        scenario = _scenario(penalties={"C_b": 2.0})
        self.assertEqual(scenario.penalty_params(0).C_b, 2.0)

    def test_penalty_model_resolve(self):
        params = PenaltyModel(C_c=2.0).resolve(0, default_length=3.0)
        self.assertEqual((params.C_c, params.s_c, params.L), (2.0, 2.0, 3.0))

    def test_permeability_overrides(self):
        scenario = _scenario(matrix_permeability=2.0, permeability_overrides=[
            {"x_min": 0.0, "x_max": 0.5, "y_min": 0.0, "y_max": 1.0, "value": 5.0},
            {"x_min": 0.0, "x_max": 0.25, "y_min": 0.0, "y_max": 1.0, "value": 7.0},
        ])
        mesh = build_uniform_triangulation(4, 4, Domain(0.0, 1.0, 0.0, 1.0))
        permeability = scenario.cell_permeability(mesh)
        x = mesh.cell_centroids()[:, 0]
        npt.assert_array_equal(permeability[x < 0.25], 7.0)
        npt.assert_array_equal(permeability[(x > 0.25) & (x < 0.5)], 5.0)
        npt.assert_array_equal(permeability[x > 0.5], 2.0)

    def test_source_functions(self):
        points = np.array([[0.5, 0.5], [0.25, 0.75]])
        npt.assert_array_equal(_scenario().source_function()(points), 0.0)
        npt.assert_array_equal(_scenario(source=3.0).source_function()(points), 3.0)
        manufactured = builtin_manufactured()
        self.assertTrue(manufactured.is_manufactured)
        npt.assert_allclose(manufactured.source_function()(points), manufactured_source(points))

    def test_with_zero_data(self):
        scenario = builtin_example1("conductive").model_copy(update={"source": 2.0})
        zero = scenario.with_zero_data()
        self.assertEqual(zero.source, 0.0)
        self.assertTrue(all(bc.value == 0.0 for bc in zero.boundary.values()))
        self.assertEqual(zero.boundary["left"].type, "dirichlet")
        self.assertEqual(zero.fractures, scenario.fractures)

    def test_fracture_specs(self):
        specs = builtin_example1("blocking").fracture_specs()
        self.assertEqual(len(specs), 2)
        self.assertTrue(all(spec.kind is FractureKind.BLOCKING for spec in specs))
        self.assertEqual(specs[0].thickness, 1e-3)


class TestBuiltins(unittest.TestCase):
    """
    Test the built-in scenario registry.
    """

    def test_names(self):
        self.assertEqual(sorted(BUILTINS), ["example1a", "example1b", "manufactured"])
        self.assertEqual(get_builtin("example1a").name, "example1a")
        self.assertEqual(get_builtin("example1b").name, "example1b")

    def test_unknown(self):
        with self.assertRaises(ConfigurationError):
            get_builtin("example9")
        with self.assertRaises(ConfigurationError):
            builtin_example1("porous")

    def test_example1_line_cut(self):
        cut = builtin_example1("conductive").line_cuts[0]
        self.assertEqual((cut.start, cut.end, cut.samples), ((0.5, 0.0), (0.5, 1.0), 200))


if __name__ == "__main__":
    unittest.main()
