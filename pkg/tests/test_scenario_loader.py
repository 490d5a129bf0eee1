import math

import pytest

from exceptions import MalformedScenarioError, ScenarioError, UnknownIdentifierError
from scenario_loader import load_scenario, parse_number, parse_scenario, shipped_scenarios
from settings import IDENTITY_IDS

MINIMAL = """
[model]
name = circle
"""


class TestDefaults:
    def test_minimal_scenario(self):
        scenario = parse_scenario(MINIMAL)
        assert scenario.name == "scenario"
        assert scenario.seed == 0
        assert scenario.density == {"preset": "zero"}
        assert scenario.check_count == 0
        assert scenario.solver is None

    def test_tolerances(self):
        tolerances = parse_scenario(MINIMAL).tolerances
        assert tolerances["identity"] == 1e-6
        assert tolerances["fd_identity"] == 1e-4
        assert tolerances["spectral"] == 1e-6

    def test_solver_defaults_by_basis(self):
        scenario = parse_scenario("[model]\nname = sphere-spherical\n[solver]\nbasis = sphere-harmonic-chart\n")
        assert scenario.solver["task"] == "eigen"
        assert scenario.solver["size"] == 6
        assert scenario.solver["hypothesis"] == "control"


class TestParsing:
    def test_all_selects_the_catalog_in_order(self):
        scenario = parse_scenario(MINIMAL + "[checks]\nidentities = all\n")
        assert scenario.identities == IDENTITY_IDS

    def test_ids_come_back_in_catalog_order(self):
        scenario = parse_scenario(MINIMAL + "[checks]\nidentities = divf-hessian, weighted-bianchi\n")
        assert scenario.identities == ["weighted-bianchi", "divf-hessian"]

    @pytest.mark.parametrize("text, value", [("0.25", 0.25), ("pi/2", math.pi / 2), ("2*pi/3", 2 * math.pi / 3)])
    def test_numbers(self, text, value):
        assert parse_number(text, "model.cap_angle") == pytest.approx(value)

    def test_constant_expression_in_model(self):
        scenario = parse_scenario("[model]\nname = hemisphere\ncap_angle = pi/2\n")
        assert scenario.model["cap_angle"] == pytest.approx(math.pi / 2)

    def test_diag_family_infers_dimension(self):
        scenario = parse_scenario("[model]\nname = diag-family\nexpressions = 1, exp(2*x)\ncoordinates = x, y\n")
        assert scenario.model["dim"] == 2

    def test_overrides(self):
        scenario = parse_scenario(MINIMAL + "[solver]\nbasis = fourier-circle\nsize = 9\n")
        overridden = scenario.with_overrides(resolution=13, tolerance=1e-8, seed=4)
        assert overridden.grid["nodes"] == 13
        assert overridden.solver["size"] == 13
        assert overridden.tolerances["identity"] == 1e-8
        assert overridden.seed == 4
        assert scenario.solver["size"] == 9


class TestErrors:
    def test_unknown_identity_lists_valid_ids(self):
        with pytest.raises(UnknownIdentifierError) as info:
            parse_scenario(MINIMAL + "[checks]\nidentities = bianchi\n")
        assert "bianchi" in str(info.value)
        assert all(i in str(info.value) for i in IDENTITY_IDS)

    @pytest.mark.parametrize("text", [
        MINIMAL + "[grid]\nnodez = 4\n",
        MINIMAL + "[extras]\nkey = 1\n",
        "[scenario]\nname = headless\n",
        MINIMAL + "[tolerances]\nidentity = -1\n",
        MINIMAL + "[grid]\nnodes = 0\n",
        MINIMAL + "[model]\n",
        MINIMAL + "[solver]\ntask = eigen\n",
        "[model]\nname = hemisphere\ncap_angle = theta\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(ScenarioError):
            parse_scenario(text)

    def test_unknown_model(self):
        with pytest.raises(UnknownIdentifierError):
            parse_scenario("[model]\nname = torus\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedScenarioError):
            load_scenario(tmp_path / "absent.ini")


class TestShippedScenarios:
    def test_cookbook_is_present(self):
        assert len(shipped_scenarios()) >= 10

    @pytest.mark.parametrize("path", shipped_scenarios(), ids=lambda p: p.stem)
    def test_parses(self, path):
        scenario = load_scenario(path)
        assert scenario.name == path.stem
