"""
Scenario files: INI documents describing one verification run

Sections [scenario], [model], [density], [potential], [checks], [solver],
[grid] and [tolerances]. Every key is validated against the registries in
settings; unknown sections and keys are errors so a misspelled tolerance
never silently falls back to a default.
"""
import configparser
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import sympy as sp

from config_loader import get_config
from exceptions import MalformedScenarioError, UnknownIdentifierError
from settings import (
    BASIS_KINDS,
    BOUNDARY_CHECK_IDS,
    FIELD_PRESETS,
    IDENTITY_IDS,
    INTERVAL_FAMILIES,
    LINEARIZATION_CHECK_IDS,
    MODEL_NAMES,
    PROBE_HYPOTHESES,
    PROBE_LADDER_1D,
    PROBE_LADDER_SPHERE,
    SCENARIO_SECTIONS,
    SOLVER_TASKS,
    TENSOR_PRESETS,
    VECTOR_PRESETS,
    WEIGHTED_CHECK_IDS,
)

logger = logging.getLogger(__name__)

# Values accepted in place of a number for fitted constants
AUTO = "auto"


@dataclass
class Scenario:
    name: str
    seed: int
    model: Dict[str, object]
    density: Dict[str, object]
    potential: Optional[Dict[str, object]] = None
    identities: List[str] = field(default_factory=list)
    boundary_checks: List[str] = field(default_factory=list)
    linearization_checks: List[str] = field(default_factory=list)
    weighted_checks: List[str] = field(default_factory=list)
    check_options: Dict[str, object] = field(default_factory=dict)
    solver: Optional[Dict[str, object]] = None
    grid: Dict[str, object] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    description: str = ""

    @property
    def check_count(self) -> int:
        return (len(self.identities) + len(self.boundary_checks) + len(self.linearization_checks)
                + len(self.weighted_checks))

    def echo(self) -> dict:
        """Scenario as recorded in reports"""
        return {
            "name": self.name,
            "seed": self.seed,
            "description": self.description,
            "model": dict(sorted(self.model.items())),
            "density": dict(sorted(self.density.items())),
            "potential": dict(sorted(self.potential.items())) if self.potential else None,
            "identities": list(self.identities),
            "boundary": list(self.boundary_checks),
            "linearization": list(self.linearization_checks),
            "weighted": list(self.weighted_checks),
            "checks": dict(sorted(self.check_options.items())),
            "solver": dict(sorted(self.solver.items())) if self.solver else None,
            "grid": dict(sorted(self.grid.items())),
            "tolerances": dict(sorted(self.tolerances.items())),
        }

    def with_overrides(self, resolution: Optional[int] = None, tolerance: Optional[float] = None,
                       seed: Optional[int] = None) -> "Scenario":
        """CLI overrides: resolution sets grid nodes and solver size, tolerance the identity tolerance"""
        scenario = replace(self, grid=dict(self.grid), tolerances=dict(self.tolerances),
                           solver=dict(self.solver) if self.solver else None)
        if resolution is not None:
            scenario.grid["nodes"] = int(resolution)
            if scenario.solver is not None:
                scenario.solver["size"] = int(resolution)
        if tolerance is not None:
            scenario.tolerances["identity"] = float(tolerance)
        if seed is not None:
            scenario.seed = int(seed)
        return scenario


def parse_number(text: str, key: str) -> float:
    """Float from plain decimals or constant expressions such as pi/3"""
    try:
        return float(text)
    except ValueError:
        pass
    try:
        value = sp.sympify(text)
        if value.free_symbols:
            raise TypeError("free symbols")
        return float(value)
    except (sp.SympifyError, SyntaxError, TypeError, ValueError) as e:
        raise MalformedScenarioError(f"Key '{key}' needs a number, got '{text}'") from e


def parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError as e:
        raise MalformedScenarioError(f"Key '{key}' needs an integer, got '{text}'") from e


def parse_list(text: str) -> List[str]:
    return [item.strip() for item in text.replace("\n", ",").split(",") if item.strip()]


def parse_bool(text: str, key: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise MalformedScenarioError(f"Key '{key}' needs true or false, got '{text}'")


def _optional_number(text: Optional[str], key: str) -> Optional[float]:
    if text is None or text.strip().lower() == AUTO:
        return None
    return parse_number(text, key)


def _ids(text: Optional[str], kind: str, valid: List[str]) -> List[str]:
    """Registry ids in registry order; 'all' selects every id"""
    if not text:
        return []
    items = parse_list(text)
    if items == ["all"]:
        return list(valid)
    for item in items:
        if item not in valid:
            raise UnknownIdentifierError(kind, item, valid)
    return [item for item in valid if item in items]


def _validate_layout(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in SCENARIO_SECTIONS:
            raise MalformedScenarioError(
                f"Unknown section [{section}]. Valid sections: {', '.join(SCENARIO_SECTIONS)}"
            )
        for key in parser[section]:
            if key not in SCENARIO_SECTIONS[section]:
                raise MalformedScenarioError(
                    f"Unknown key '{key}' in section [{section}]. Valid keys: "
                    f"{', '.join(SCENARIO_SECTIONS[section])}"
                )
    if not parser.has_section("model") or not parser.has_option("model", "name"):
        raise MalformedScenarioError("Scenario needs a [model] section with a name")


def _field_spec(section, kind: str) -> Dict[str, object]:
    preset = section.get("preset", "zero")
    if preset not in FIELD_PRESETS:
        raise UnknownIdentifierError(f"{kind} preset", preset, FIELD_PRESETS)
    spec: Dict[str, object] = {"preset": preset}
    if "value" in section:
        spec["value"] = parse_number(section["value"], f"{kind}.value")
    if "vector" in section:
        spec["vector"] = [parse_number(v, f"{kind}.vector") for v in parse_list(section["vector"])]
    if "expression" in section:
        spec["expression"] = section["expression"]
    if "shift" in section:
        spec["shift"] = parse_number(section["shift"], f"{kind}.shift")
    return spec


def _model_spec(section) -> Dict[str, object]:
    name = section["name"]
    if name not in MODEL_NAMES:
        raise UnknownIdentifierError("model", name, MODEL_NAMES)
    spec: Dict[str, object] = {"name": name}
    for key in ("dim",):
        if key in section:
            spec[key] = parse_int(section[key], f"model.{key}")
    for key in ("truncation", "cap_angle", "lower", "upper", "radius"):
        if key in section:
            spec[key] = parse_number(section[key], f"model.{key}")
    for key in ("expressions", "coordinates"):
        if key in section:
            spec[key] = parse_list(section[key])
    if "pole" in section:
        spec["pole"] = section["pole"]
    if name == "diag-family" and "dim" not in spec and "expressions" in spec:
        spec["dim"] = len(spec["expressions"])
    return spec


def _check_options(section) -> Dict[str, object]:
    options: Dict[str, object] = {
        "tensor": section.get("tensor", "traceless-ricci-f"),
        "vector": section.get("vector", "gradient"),
        "samples": parse_int(section.get("samples", "3"), "checks.samples"),
    }
    if options["tensor"] not in TENSOR_PRESETS:
        raise UnknownIdentifierError("tensor preset", options["tensor"], TENSOR_PRESETS)
    if options["vector"] not in VECTOR_PRESETS:
        raise UnknownIdentifierError("vector preset", options["vector"], VECTOR_PRESETS)
    for key in ("lambda0", "lambda1", "c0", "c1", "omega"):
        options[key] = _optional_number(section.get(key), f"checks.{key}")
    options["positivity_floor"] = _optional_number(section.get("positivity_floor"), "checks.positivity_floor")
    if "eigen_coefficient" in section:
        options["eigen_coefficient"] = section["eigen_coefficient"]
    return options


def _solver_spec(section, model_spec: Dict[str, object]) -> Dict[str, object]:
    task = section.get("task", "eigen")
    if task not in SOLVER_TASKS:
        raise UnknownIdentifierError("solver task", task, SOLVER_TASKS)
    basis = section.get("basis")
    if basis is None:
        raise MalformedScenarioError("[solver] needs a basis")
    if basis not in BASIS_KINDS:
        raise UnknownIdentifierError("basis", basis, BASIS_KINDS)
    spec: Dict[str, object] = {"task": task, "basis": basis}
    if "family" in section:
        if section["family"] not in INTERVAL_FAMILIES:
            raise UnknownIdentifierError("interval family", section["family"], INTERVAL_FAMILIES)
        spec["family"] = section["family"]
    spec["size"] = parse_int(section.get("size", "6" if basis in ("sphere-harmonic-chart", "hermite-chart") else "32"),
                             "solver.size")
    spec["count"] = parse_int(section.get("count", "5"), "solver.count")
    hypothesis = section.get("hypothesis", "control")
    if hypothesis not in PROBE_HYPOTHESES:
        raise UnknownIdentifierError("probe hypothesis", hypothesis, PROBE_HYPOTHESES)
    spec["hypothesis"] = hypothesis
    default_ladder = PROBE_LADDER_SPHERE if basis == "sphere-harmonic-chart" else PROBE_LADDER_1D
    if "ladder" in section:
        spec["ladder"] = [parse_int(v, "solver.ladder") for v in parse_list(section["ladder"])]
    else:
        spec["ladder"] = list(default_ladder)
    spec["floor"] = parse_number(section.get("floor", "0"), "solver.floor")
    if "expected_kernel_dim" in section:
        spec["expected_kernel_dim"] = parse_int(section["expected_kernel_dim"], "solver.expected_kernel_dim")
    if "expected_span" in section:
        spec["expected_span"] = section["expected_span"].split()
        if not spec["expected_span"]:
            raise MalformedScenarioError("solver.expected_span needs at least one basis label")
    return spec


def _grid_spec(section, config) -> Dict[str, object]:
    spec: Dict[str, object] = {
        "rule": section.get("rule", "auto"),
        "nodes": parse_int(section.get("nodes", str(config.NODES)), "grid.nodes"),
        "boundary_nodes": parse_int(section.get("boundary_nodes", str(config.BOUNDARY_NODES)), "grid.boundary_nodes"),
        "sample_nodes": parse_int(section.get("sample_nodes", "6"), "grid.sample_nodes"),
        "convergence": parse_bool(section.get("convergence", "true"), "grid.convergence"),
    }
    for key in ("nodes", "boundary_nodes", "sample_nodes"):
        if spec[key] < 1:
            raise MalformedScenarioError(f"grid.{key} must be positive, got {spec[key]}")
    return spec


def _tolerances(section, config) -> Dict[str, float]:
    defaults = {
        "identity": config.TOL_IDENTITY,
        "fd_identity": config.TOL_FD_IDENTITY,
        "kernel": config.TOL_KERNEL_ANALYTIC,
        "boundary": config.TOL_BOUNDARY,
        "duality": config.TOL_DUALITY,
        "hypothesis": config.TOL_HYPOTHESIS,
        "sigma_threshold": config.SIGMA_THRESHOLD,
        "spectral": 1e-6,
        "oracle": 1e-5,
        "angle": 1e-6,
    }
    out = {}
    for key, default in defaults.items():
        out[key] = parse_number(section[key], f"tolerances.{key}") if key in section else float(default)
        if not out[key] > 0.0:
            raise MalformedScenarioError(f"tolerances.{key} must be positive, got {out[key]}")
    return out


def parse_scenario(text: str, config=None) -> Scenario:
    """
    Parse scenario text into a validated Scenario with defaults applied

    Raises MalformedScenarioError or UnknownIdentifierError; both derive
    from ScenarioError.
    """
    config = config or get_config()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise MalformedScenarioError(f"Scenario is not a valid INI document: {e}") from e
    _validate_layout(parser)

    def section(name):
        return parser[name] if parser.has_section(name) else {}

    head = section("scenario")
    model = _model_spec(parser["model"])
    checks = section("checks")
    scenario = Scenario(
        name=head.get("name", "scenario"),
        seed=parse_int(head.get("seed", "0"), "scenario.seed"),
        description=head.get("description", ""),
        model=model,
        density=_field_spec(section("density"), "density"),
        potential=_field_spec(parser["potential"], "potential") if parser.has_section("potential") else None,
        identities=_ids(checks.get("identities"), "identity", IDENTITY_IDS),
        boundary_checks=_ids(checks.get("boundary"), "boundary check", BOUNDARY_CHECK_IDS),
        linearization_checks=_ids(checks.get("linearization"), "linearization check", LINEARIZATION_CHECK_IDS),
        weighted_checks=_ids(checks.get("weighted"), "weighted check", WEIGHTED_CHECK_IDS),
        check_options=_check_options(checks),
        solver=_solver_spec(parser["solver"], model) if parser.has_section("solver") else None,
        grid=_grid_spec(section("grid"), config),
        tolerances=_tolerances(section("tolerances"), config),
    )
    logger.debug(f"Parsed scenario '{scenario.name}' with {scenario.check_count} checks")
    return scenario


def load_scenario(path, config=None) -> Scenario:
    """Read and parse a scenario file (UTF-8)"""
    path = Path(path)
    if not path.is_file():
        raise MalformedScenarioError(f"Scenario file '{path}' not found")
    return parse_scenario(path.read_text(encoding="utf-8"), config)


def shipped_scenarios(directory: Optional[str] = None) -> List[Path]:
    """The cookbook scenarios bundled with the tool"""
    directory = directory or os.path.join(os.path.dirname(os.path.abspath(__file__)), "scenarios")
    return sorted(Path(directory).glob("*.ini"))
