"""
Scenario execution: build the weighted space, run the selected checks in
catalog order, run the solver task and assemble a RunReport

A failing or crashing check becomes a failing row; the run itself never
aborts on a check.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from boundary_integrals import (
    boundary_area_identity,
    gauss_reduction_check,
    pohozaev_schoen,
    surface_gravity,
    thm1_estimate,
)
from config_loader import get_config
from discrete_bases import build_basis
from exceptions import GeometryError, MalformedScenarioError
from expressions import compile_scalar, parse_expression
from fields import zero_vector
from identity_suite import (
    IdentityContext,
    ResidualReport,
    check_drift_forms,
    check_self_adjointness,
    check_trace_identity,
    eigen_relation_residual,
    run_identities,
)
from kernel_solver import (
    coordinate_subspace,
    dense_fd_spectrum,
    kernel_search,
    nonexistence_probe,
    principal_angles,
    solve_drift_eigen,
)
from linearization import (
    MetricPerturbation,
    adjoint_duality_check,
    check_perturbation,
    linearized_perelman,
    linearized_perelman_expanded,
    variation_oracle_residuals,
)
from manifold_models import build_model
from quadrature import grid_from_spec, sample_grid
from random_fields import field_generator, gradient_vector, random_expression, random_scalar, random_tensor, random_vector
from settings import SCHEMA_VERSION, TOOL_NAME
from tensor_calculus import gradient_field, metric_tensor_field
from utils import relative_gap
from weighted_calculus import (
    WeightedSpace,
    bakry_emery_ricci_field,
    field_expression,
    field_from_preset,
    traceless_ricci_field,
)

logger = logging.getLogger(__name__)

# Scale of random metric perturbations
PERTURBATION_SCALE = 0.1
# The variation oracle is accepted at this multiple of the identity tolerance
VARIATION_TOLERANCE_FACTOR = 10.0
CHECK_ERRORS = (GeometryError, ValueError, FloatingPointError, np.linalg.LinAlgError)


@dataclass
class RunReport:
    scenario: dict
    checks: List[ResidualReport] = field(default_factory=list)
    solver: Optional[dict] = None
    wall_ms: Optional[float] = None
    version: str = "1.0.0"
    numeric_failure: Optional[str] = None

    @property
    def passed(self) -> bool:
        if self.numeric_failure:
            return False
        if self.solver is not None and not self.solver.get("pass", True):
            return False
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "tool": TOOL_NAME,
            "version": self.version,
            "scenario": self.scenario,
            "checks": [c.to_dict() for c in self.checks],
            "solver": self.solver,
            "wall_ms": self.wall_ms,
            "numeric_failure": self.numeric_failure,
            "pass": self.passed,
        }


@dataclass
class RunEnvironment:
    """Everything built once per scenario"""
    ws: WeightedSpace
    u: Optional[object]
    volume: object
    boundary: object
    samples: object
    rng: np.random.Generator


def build_space(scenario, config=None) -> WeightedSpace:
    config = config or get_config()
    spec = dict(scenario.model)
    name = spec.pop("name")
    spec.setdefault("truncation", config.TRUNCATION)
    model = build_model(name, fd_policy=config.step_policy(), **spec)
    return WeightedSpace(model, field_from_preset(model, label="f", **scenario.density))


def build_environment(scenario, config=None) -> RunEnvironment:
    config = config or get_config()
    ws = build_space(scenario, config)
    model = ws.model
    u = field_from_preset(model, label="u", **scenario.potential) if scenario.potential else None
    volume, boundary = grid_from_spec(model, scenario.grid, config)
    samples = sample_grid(model, scenario.grid.get("sample_nodes", 6), config.POLE_BAND)
    return RunEnvironment(ws, u, volume, boundary, samples, field_generator(scenario.seed))


def _guarded(check_id: str, fn: Callable[[], ResidualReport]) -> ResidualReport:
    try:
        return fn()
    except CHECK_ERRORS as e:
        logger.error(f"Check '{check_id}' failed: {e}")
        return ResidualReport.failure(check_id, str(e))


def _scalar_or_random(env: RunEnvironment, label: str = "u"):
    return env.u if env.u is not None else random_scalar(env.ws.model, env.rng, label=label)


def _tensor(env: RunEnvironment, preset: str):
    ws = env.ws
    if preset == "metric":
        return metric_tensor_field(ws.model), False
    if preset == "ricci-f":
        return bakry_emery_ricci_field(ws), False
    if preset == "traceless-ricci-f":
        return traceless_ricci_field(ws), True
    return random_tensor(ws.model, env.rng, scale=PERTURBATION_SCALE)[0], False


def _vector(env: RunEnvironment, preset: str):
    model = env.ws.model
    if preset == "zero":
        return zero_vector(model.dim)
    if preset == "gradient":
        if env.u is not None:
            return gradient_field(model, env.u)
        return gradient_vector(model, random_expression(model, env.rng)[0])
    return random_vector(model, env.rng)


def _identity_reports(scenario, env: RunEnvironment) -> List[ResidualReport]:
    if not scenario.identities:
        return []
    tol = scenario.tolerances
    opts = scenario.check_options
    tensor, is_traceless = _tensor(env, opts["tensor"])
    ctx = IdentityContext(
        ws=env.ws,
        grid=env.samples,
        u=env.u,
        v=None if env.u is not None else random_scalar(env.ws.model, env.rng, label="v"),
        tensor=tensor,
        tensor_is_traceless_ricci=is_traceless,
        lambda0=opts.get("lambda0"),
        lambda1=opts.get("lambda1"),
        c0=opts.get("c0"),
        c1=opts.get("c1"),
        omega=opts.get("omega"),
        positivity_floor=opts.get("positivity_floor"),
        tolerance=tol["identity"],
        fd_tolerance=tol["fd_identity"],
        hypothesis_tolerance=tol["hypothesis"],
        sigma_threshold=tol["sigma_threshold"],
        kernel_tols=(tol["kernel"], get_config().TOL_KERNEL_FD),
        measure_convergence=bool(scenario.grid.get("convergence", True)),
    )
    return run_identities(scenario.identities, ctx)


def _random_perturbation(env: RunEnvironment) -> MetricPerturbation:
    h, compact = random_tensor(env.ws.model, env.rng, scale=PERTURBATION_SCALE)
    pert = MetricPerturbation(h, t_step=get_config().T_STEP, compact_support=compact)
    check_perturbation(env.ws.model, pert, env.samples.points)
    return pert


def _variation_oracle(scenario, env: RunEnvironment) -> ResidualReport:
    gaps, worst = [], {}
    for _ in range(scenario.check_options["samples"]):
        pert = _random_perturbation(env)
        for name, values in variation_oracle_residuals(env.ws, pert, env.samples.points).items():
            gaps.extend(values.tolist())
            worst[name] = max(worst.get(name, 0.0), float(np.max(values)) if values.size else 0.0)
    tolerance = VARIATION_TOLERANCE_FACTOR * scenario.tolerances["identity"]
    return ResidualReport.from_residuals("variation-oracle", gaps, tolerance, diagnostics=worst)


def _decomposition(scenario, env: RunEnvironment) -> ResidualReport:
    residuals = []
    for _ in range(scenario.check_options["samples"]):
        pert = _random_perturbation(env)
        for x in env.samples.points:
            residuals.append(abs(linearized_perelman(env.ws, pert, x) - linearized_perelman_expanded(env.ws, pert, x)))
    return ResidualReport.from_residuals("decomposition", residuals, scenario.tolerances["identity"])


def _adjoint_duality(scenario, env: RunEnvironment) -> ResidualReport:
    gaps, pairs = [], []
    for _ in range(scenario.check_options["samples"]):
        u = _scalar_or_random(env)
        pert = _random_perturbation(env)
        report = adjoint_duality_check(env.ws, u, pert, env.volume, scenario.tolerances["duality"], env.boundary)
        gaps.append(report.sup_residual)
        pairs.append({"lhs": report.diagnostics["lhs"], "rhs": report.diagnostics["rhs"]})
    return ResidualReport.from_residuals("adjoint-duality", gaps, scenario.tolerances["duality"],
                                         diagnostics={"pairs": pairs})


def _linearization_reports(scenario, env: RunEnvironment) -> List[ResidualReport]:
    table = {
        "variation-oracle": _variation_oracle,
        "decomposition": _decomposition,
        "adjoint-duality": _adjoint_duality,
    }
    return [_guarded(check_id, lambda fn=table[check_id]: fn(scenario, env))
            for check_id in scenario.linearization_checks]


def _surface_gravity(scenario, env: RunEnvironment) -> ResidualReport:
    tol = scenario.tolerances["boundary"]
    gravities = surface_gravity(env.ws, _require_u(env), env.boundary, tol, tol)
    return ResidualReport.from_residuals(
        "surface-gravity", [g.variation for g in gravities], tol,
        diagnostics={g.component: g.kappa for g in gravities},
    )


def _pohozaev(scenario, env: RunEnvironment) -> ResidualReport:
    tol = scenario.tolerances["boundary"]
    opts = scenario.check_options
    T, _ = _tensor(env, opts["tensor"])
    rounds = opts["samples"] if opts["vector"] == "random" else 1
    gaps, sides = [], []
    for _ in range(rounds):
        report = pohozaev_schoen(env.ws, T, _vector(env, opts["vector"]), env.volume, env.boundary, tol)
        gaps.append(report.gap)
        sides.append({"lhs": report.lhs, "rhs": report.rhs})
    return ResidualReport.from_residuals("pohozaev-schoen", gaps, tol, diagnostics={"sides": sides})


def _require_u(env: RunEnvironment):
    if env.u is None:
        raise ValueError("this check needs a potential u; add a [potential] section")
    return env.u


def _boundary_reports(scenario, env: RunEnvironment) -> List[ResidualReport]:
    tol = scenario.tolerances
    opts = scenario.check_options
    kernel_tols = (tol["kernel"], get_config().TOL_KERNEL_FD)
    table = {
        "surface-gravity": lambda: _surface_gravity(scenario, env),
        "boundary-area": lambda: boundary_area_identity(env.ws, _require_u(env), env.volume, env.boundary,
                                                        tol["boundary"], kernel_tols, tol["boundary"]).to_residual_report(),
        "pohozaev-schoen": lambda: _pohozaev(scenario, env),
        "gauss-reduction": lambda: gauss_reduction_check(env.ws, env.u, env.boundary, tol["fd_identity"],
                                                         tol["hypothesis"]),
        "thm1-estimate": lambda: thm1_estimate(env.ws, _require_u(env), opts.get("c0"), opts.get("c1"), env.volume,
                                               env.boundary, tol["hypothesis"], tol["boundary"]).to_residual_report(),
    }
    reports = []
    for check_id in scenario.boundary_checks:
        if env.ws.model.boundary is None:
            reports.append(ResidualReport.failure(check_id, f"model '{env.ws.model.name}' has no boundary"))
            continue
        reports.append(_guarded(check_id, table[check_id]))
    return reports


def eigen_coefficient(env: RunEnvironment, scenario):
    """Coefficient field c of Δ_f u = c·u; the text may use f for the density"""
    text = scenario.check_options.get("eigen_coefficient")
    if text is None:
        raise ValueError("eigen-relation needs checks.eigen_coefficient")
    model = env.ws.model
    f_expr = field_expression(model, **scenario.density)
    expr = parse_expression(text, model.symbols, extra={"f": f_expr})
    return compile_scalar(expr, model.symbols, order=1, label="c")


def _weighted_reports(scenario, env: RunEnvironment) -> List[ResidualReport]:
    tol = scenario.tolerances
    table = {
        "drift-forms": lambda: check_drift_forms(env.ws, _scalar_or_random(env), env.samples, tol["identity"]),
        "self-adjointness": lambda: check_self_adjointness(env.ws, _scalar_or_random(env),
                                                           random_scalar(env.ws.model, env.rng, label="v"),
                                                           env.volume, tol["identity"]),
        "trace-identity": lambda: check_trace_identity(env.ws, _scalar_or_random(env), env.samples, tol["identity"],
                                                       (tol["kernel"], get_config().TOL_KERNEL_FD)),
        "eigen-relation": lambda: eigen_relation_residual(env.ws, _require_u(env), eigen_coefficient(env, scenario),
                                                          env.samples, tol["identity"]),
    }
    return [_guarded(check_id, table[check_id]) for check_id in scenario.weighted_checks]


def run_solver(scenario, env: RunEnvironment, task: Optional[str] = None) -> Dict[str, object]:
    """
    Solver task of the scenario

    The returned mapping always carries eigenvalues, kernel_dim and
    min_singular_value (None when the task does not produce them) and pass.
    """
    spec = scenario.solver
    if spec is None:
        raise MalformedScenarioError("Scenario has no [solver] section")
    task = task or spec["task"]
    ws = env.ws
    tol = scenario.tolerances
    gram_limit = get_config().GRAM_CONDITION
    out: Dict[str, object] = {"task": task, "basis": spec["basis"], "eigenvalues": None, "kernel_dim": None,
                              "min_singular_value": None}
    if task == "probe":
        report = nonexistence_probe(ws, spec["basis"], spec["ladder"], spec["hypothesis"], spec["floor"],
                                    spec.get("family"), tol["hypothesis"], tol["kernel"], gram_limit)
        out.update(report.to_dict())
        out["kernel_dim"] = report.levels[-1].kernel_dim if report.levels else None
        return out
    basis = build_basis(spec["basis"], ws.model, spec["size"], spec.get("family"))
    if task == "eigen":
        result = solve_drift_eigen(ws, basis, count=spec["count"], gram_limit=gram_limit)
        out.update(result.to_dict())
        passed = result.weighted_orthonormality_residual < tol["spectral"]
        if basis.kind != "grid-fd":
            passed = passed and result.symmetry_residual < tol["spectral"]
        if ws.model.dim == 1 and ws.model.kind in ("interval", "circle"):
            oracle = dense_fd_spectrum(ws, count=len(result.eigenvalues))
            out["oracle_eigenvalues"] = [float(s) for s in oracle]
            out["oracle_gap"] = max(relative_gap(a, b) for a, b in zip(result.eigenvalues, oracle))
            if out["oracle_gap"] >= tol["oracle"]:
                logger.warning(f"Spectrum disagrees with the dense FD oracle: gap {out['oracle_gap']:.3e}")
            passed = passed and out["oracle_gap"] < tol["oracle"]
        out["pass"] = bool(passed)
        return out
    result = kernel_search(ws, basis, kernel_tolerance=tol["kernel"], gram_limit=gram_limit)
    out.update(result.to_dict())
    expected = spec.get("expected_kernel_dim")
    out["expected_kernel_dim"] = expected
    passed = expected is None or result.kernel_dim == expected
    span = spec.get("expected_span")
    if span:
        target = coordinate_subspace(basis, span)
        out["expected_span"] = list(span)
        out["max_principal_angle"] = None
        if result.kernel_dim:
            angles = principal_angles(result.gram, result.kernel_coefficients, target)
            out["max_principal_angle"] = float(np.max(angles))
        passed = passed and out["max_principal_angle"] is not None and out["max_principal_angle"] < tol["angle"]
    out["pass"] = bool(passed)
    return out


def run(scenario, config=None, checks: bool = True, solver: bool = True, task: Optional[str] = None,
        timing: bool = False) -> RunReport:
    """
    Execute a scenario

    Checks run in catalog order: identities, weighted, linearization,
    boundary. Numeric failures outside any check are recorded on the report
    and make it fail.
    """
    config = config or get_config()
    start = time.perf_counter()
    report = RunReport(scenario=scenario.echo(), version=config.VERSION)
    logger.info(f"Running scenario '{scenario.name}' (seed {scenario.seed})")
    try:
        env = build_environment(scenario, config)
        if checks:
            report.checks.extend(_identity_reports(scenario, env))
            report.checks.extend(_weighted_reports(scenario, env))
            report.checks.extend(_linearization_reports(scenario, env))
            report.checks.extend(_boundary_reports(scenario, env))
        if solver and (scenario.solver is not None or task is not None):
            report.solver = run_solver(scenario, env, task)
    except (GeometryError, FloatingPointError, np.linalg.LinAlgError) as e:
        logger.error(f"Scenario '{scenario.name}' hit a numeric failure: {e}")
        report.numeric_failure = str(e)
    if timing:
        report.wall_ms = round((time.perf_counter() - start) * 1000.0, 3)
    failed = [c.identity_id for c in report.checks if not c.passed]
    if failed:
        logger.warning(f"Scenario '{scenario.name}': failing checks {', '.join(failed)}")
    return report
