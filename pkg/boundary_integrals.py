"""
Weighted integrals over Σ and ∂Σ and the boundary identities built on them

Surface gravity, the boundary-area identity, the Pohozaev-Schoen
integration by parts, the weighted Gauss equation along ∂Σ and the
boundary area estimate. Boundary quantities are computed from the
parameterization: the induced metric γ = EᵀgE, the unit normal, and the
second fundamental form from differences of the normal along the boundary
parameters.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from exceptions import PotentialNotVanishingError, PotentialSignError
from fields import ScalarField, SymTensorField, VectorField
from finite_differences import partials
from identity_suite import ResidualReport, fit_affine, kernel_diagnostics
from manifold_models import MetricModel
from tensor_calculus import covector_norm, lie_derivative_metric, local_geometry, tensor_inner
from utils import relative_gap
from weighted_calculus import WeightedSpace, bakry_emery_ricci, f_divergence_tensor, perelman_scalar

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurfaceGravity:
    component: str
    kappa: float
    variation: float
    certified: bool = False

    def to_dict(self) -> dict:
        return {"component": self.component, "kappa": self.kappa, "variation": self.variation,
                "certified": self.certified}


@dataclass
class TwoSidedReport:
    """Both sides of an integral identity and their relative gap |l - r| / (1 + |r|)"""
    check_id: str
    lhs: float
    rhs: float
    tolerance: float
    grid_size: int = 0
    hypothesis_ok: bool = True
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return relative_gap(self.lhs, self.rhs)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.gap) and self.gap < self.tolerance)

    def to_residual_report(self) -> ResidualReport:
        diagnostics = {"lhs": self.lhs, "rhs": self.rhs}
        diagnostics.update(self.diagnostics)
        return ResidualReport.scalar(self.check_id, self.gap, self.tolerance, grid_size=self.grid_size,
                                     diagnostics=diagnostics, hypothesis_ok=self.hypothesis_ok)


@dataclass
class InequalityReport:
    """lhs < rhs evaluated by quadrature; strictness is recorded, not adjudicated"""
    check_id: str
    lhs: float
    rhs: float
    grid_size: int = 0
    hypothesis_ok: bool = True
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack > 0.0

    @property
    def evaluated(self) -> bool:
        return bool(np.isfinite(self.lhs) and np.isfinite(self.rhs))

    def to_residual_report(self) -> ResidualReport:
        diagnostics = {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "holds": self.holds}
        diagnostics.update(self.diagnostics)
        report = ResidualReport.scalar(self.check_id, 0.0 if self.evaluated else float("inf"), 1.0,
                                       grid_size=self.grid_size, diagnostics=diagnostics,
                                       hypothesis_ok=self.hypothesis_ok)
        report.sup_residual = report.mean_residual = abs(self.slack) if self.evaluated else float("nan")
        report.passed = self.evaluated
        return report


def weighted_volume_integral(ws: WeightedSpace, integrand, grid) -> float:
    """Σ w · √det g · e^{-f} · integrand; integrand is a ScalarField or any callable of a chart point"""
    total = 0.0
    for x, w in zip(grid.points, grid.weights):
        total += w * ws.measure_factor(x) * float(integrand(x))
    return total


def unit_normal(model, component, x) -> np.ndarray:
    """Outward normal of a component, rescaled to g-norm 1"""
    nu = np.asarray(component.outward_normal(np.asarray(x, dtype=float)), dtype=float)
    return nu / math.sqrt(float(nu @ local_geometry(model, x).g @ nu))


def induced_metric(model, component, s) -> np.ndarray:
    """γ_ab = E_aᵀ g E_b on the boundary parameters"""
    E = component.tangent_frame(s, model.fd_policy)
    return E.T @ local_geometry(model, component.point(s)).g @ E


def area_factor(model, component, s) -> float:
    if component.param_dim == 0:
        return 1.0
    return math.sqrt(float(np.linalg.det(induced_metric(model, component, s))))


def weighted_boundary_integral(ws: WeightedSpace, integrand, bgrid, components: Optional[List[str]] = None) -> Dict[str, float]:
    """
    ∫_{Γ_α} integrand dσ_f per component

    integrand(component, x, s) receives the BoundaryComponent, the chart point
    and the boundary parameters.
    """
    model = ws.model
    out = {}
    for comp_grid in bgrid:
        if components is not None and comp_grid.name not in components:
            continue
        comp = model.boundary.component(comp_grid.name)
        total = 0.0
        for s, x, w in zip(comp_grid.params, comp_grid.points, comp_grid.weights):
            total += w * area_factor(model, comp, s) * ws.weight(x) * float(integrand(comp, x, s))
        out[comp_grid.name] = total
    return out


def weighted_areas(ws: WeightedSpace, bgrid) -> Dict[str, float]:
    """σ_f(Γ_α) per component"""
    return weighted_boundary_integral(ws, lambda comp, x, s: 1.0, bgrid)


def surface_gravity(ws: WeightedSpace, u: ScalarField, bgrid, vanishing_tolerance: float = 1e-6,
                    constancy_tolerance: float = 1e-6) -> List[SurfaceGravity]:
    """
    |∇u| on each boundary component and how much it varies there

    Raises PotentialNotVanishingError when u is not zero on ∂Σ.
    """
    model = ws.model
    out = []
    for comp_grid in bgrid:
        worst = max((abs(u(x)) for x in comp_grid.points), default=0.0)
        if worst > vanishing_tolerance:
            raise PotentialNotVanishingError(
                f"u reaches {worst:.3e} on boundary component '{comp_grid.name}'"
            )
        values = np.array([covector_norm(model, u.partials(x, model.fd_policy), x) for x in comp_grid.points])
        kappa = float(np.mean(values)) if values.size else 0.0
        variation = float(np.max(np.abs(values - kappa))) if values.size else 0.0
        out.append(SurfaceGravity(comp_grid.name, kappa, variation, variation < constancy_tolerance))
    return out


def _check_nonnegative(u: ScalarField, grid, tolerance: float) -> None:
    worst = min((u(x) for x in grid.points), default=0.0)
    if worst < -tolerance:
        raise PotentialSignError(f"u takes the value {worst:.3e} < 0 in the interior")


def boundary_area_identity(ws: WeightedSpace, u: ScalarField, grid, bgrid, tolerance: float = 1e-6,
                           kernel_tols=(1e-6, 1e-3), vanishing_tolerance: float = 1e-6) -> TwoSidedReport:
    """
    (n-1) Σ_α κ_α σ_f(Γ_α) = ∫ ℛ_f u dVol_f

    Also reports the flux form -(n-1)∫⟨∇u, ν⟩ dσ_f against the same right
    side, and the gap obtained with the left side negated as
    published_sign_gap.
    """
    n = ws.dim
    model = ws.model
    _check_nonnegative(u, grid, vanishing_tolerance)
    gravities = surface_gravity(ws, u, bgrid, vanishing_tolerance)
    areas = weighted_areas(ws, bgrid)
    lhs = (n - 1) * sum(g.kappa * areas[g.component] for g in gravities)
    rhs = weighted_volume_integral(ws, lambda x: perelman_scalar(ws, x) * u(x), grid)

    def outward_derivative(comp, x, s):
        return float(u.partials(x, model.fd_policy) @ unit_normal(model, comp, x))

    flux = -(n - 1) * sum(weighted_boundary_integral(ws, outward_derivative, bgrid).values())
    diagnostics, member = kernel_diagnostics(ws, u, grid.points, *kernel_tols)
    diagnostics.update(
        flux_form=flux,
        flux_gap=relative_gap(flux, rhs),
        published_sign_gap=relative_gap(-lhs, rhs),
        surface_gravity=[g.to_dict() for g in gravities],
        weighted_areas=dict(sorted(areas.items())),
    )
    logger.info(f"Boundary-area identity: lhs={lhs:.10g}, rhs={rhs:.10g}")
    return TwoSidedReport("boundary-area", lhs, rhs, tolerance, grid_size=len(grid) + len(bgrid),
                          hypothesis_ok=member, diagnostics=diagnostics)


def pohozaev_schoen(ws: WeightedSpace, T: SymTensorField, X: VectorField, grid, bgrid,
                    tolerance: float = 1e-6) -> TwoSidedReport:
    """∫_{∂Σ} T(X, ν) dσ_f = ½ ∫ ⟨T, ℒ_X g⟩ dVol_f + ∫ (div_f T)(X) dVol_f"""
    model = ws.model

    def flux(comp, x, s):
        return float(X(x) @ T(x) @ unit_normal(model, comp, x))

    lhs = sum(weighted_boundary_integral(ws, flux, bgrid).values()) if model.boundary is not None else 0.0
    lie_part = weighted_volume_integral(ws, lambda x: 0.5 * tensor_inner(model, T(x), lie_derivative_metric(model, X, x), x), grid)
    div_part = weighted_volume_integral(ws, lambda x: float(f_divergence_tensor(ws, T, x) @ X(x)), grid)
    return TwoSidedReport("pohozaev-schoen", lhs, lie_part + div_part, tolerance,
                          grid_size=len(grid) + len(bgrid),
                          diagnostics={"lie_term": lie_part, "divergence_term": div_part})


def boundary_space(ws: WeightedSpace, component) -> WeightedSpace:
    """
    (∂Σ component, γ, f|∂Σ) over the boundary parameters

    The induced metric and the restricted density have no analytic partials;
    curvature of the boundary goes through finite differences in s.
    """
    model = ws.model
    p = component.param_dim

    def metric_at(s):
        return induced_metric(model, component, s)

    bmodel = MetricModel(
        name=f"{model.name}:{component.name}",
        dim=p,
        metric_at=metric_at,
        domain=tuple(component.param_bounds),
        kind="boundary",
        fd_policy=model.fd_policy,
    )
    density = ScalarField(value=lambda s: ws.density(component.point(s)), label="f|boundary")
    return WeightedSpace(bmodel, density)


def second_fundamental_form(model, component, s) -> np.ndarray:
    """A_ab = g_kl (∂_{s_a} ν^k + Γ^k_ij E_a^i ν^j) E_b^l"""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    x = component.point(s)
    geo = local_geometry(model, x)
    E = component.tangent_frame(s, model.fd_policy)
    nu = unit_normal(model, component, x)
    dnu = partials(lambda t: unit_normal(model, component, component.point(t)), s, model.fd_policy)
    nabla = dnu + np.einsum('kij,ia,j->ak', geo.christoffel, E, nu)
    A = nabla @ geo.g @ E
    return 0.5 * (A + A.T)


def _gauss_terms(ws: WeightedSpace, component, bspace: Optional[WeightedSpace], s):
    model = ws.model
    x = component.point(s)
    nu = unit_normal(model, component, x)
    ric_nn = float(nu @ bakry_emery_ricci(ws, x) @ nu)
    Rf = perelman_scalar(ws, x)
    d_nu_f = float(ws.density.partials(x, ws.policy) @ nu)
    if component.param_dim == 0:
        return ric_nn, Rf, 0.0, 0.0, 0.0, d_nu_f
    A = second_fundamental_form(model, component, s)
    gamma_inv = np.linalg.inv(induced_metric(model, component, s))
    H = float(np.einsum('ab,ab->', gamma_inv, A))
    A_sq = float(np.einsum('ac,bd,ab,cd->', gamma_inv, gamma_inv, A, A))
    Rf_boundary = perelman_scalar(bspace, s)
    return ric_nn, Rf, Rf_boundary, H, A_sq, d_nu_f


def gauss_reduction_check(ws: WeightedSpace, u: Optional[ScalarField], bgrid, tolerance: float = 1e-5,
                          hypothesis_tolerance: float = 1e-6) -> ResidualReport:
    """
    Ric_f(ν, ν) = ½(ℛ_f - ℛ_f^∂) along ∂Σ

    The reduction needs a totally geodesic boundary and ∂_ν f = 0; |A| and
    ∂_ν f are reported as hypothesis diagnostics. The unreduced relation
    Ric_f(ν,ν) = ½ℛ_f - ½ℛ_f^∂ + ½H_f² - ½|A|² with H_f = H - ∂_ν f holds in
    general and is reported as full_identity_residual; when the hypotheses
    fail it becomes the pass criterion.
    """
    model = ws.model
    reduced, full, a_norm, normal_f = [], [], 0.0, 0.0
    for comp_grid in bgrid:
        comp = model.boundary.component(comp_grid.name)
        bspace = boundary_space(ws, comp) if comp.param_dim > 0 else None
        for s in comp_grid.params:
            ric_nn, Rf, Rf_b, H, A_sq, d_nu_f = _gauss_terms(ws, comp, bspace, s)
            reduced.append(abs(ric_nn - 0.5 * (Rf - Rf_b)))
            full.append(abs(ric_nn - (0.5 * Rf - 0.5 * Rf_b + 0.5 * (H - d_nu_f) ** 2 - 0.5 * A_sq)))
            a_norm = max(a_norm, math.sqrt(max(A_sq, 0.0)))
            normal_f = max(normal_f, abs(d_nu_f))
    hypothesis_ok = a_norm < hypothesis_tolerance and normal_f < hypothesis_tolerance
    if not hypothesis_ok:
        logger.warning(f"gauss-reduction hypotheses off: |A| {a_norm:.3e}, ∂_ν f {normal_f:.3e}")
    full_sup = float(np.max(full)) if full else 0.0
    diagnostics = {"second_fundamental_form_norm": a_norm, "normal_derivative_f": normal_f,
                   "full_identity_residual": full_sup, "reduced_identity_residual": float(np.max(reduced)) if reduced else 0.0}
    if u is not None:
        diagnostics["boundary_potential_max"] = max((abs(u(x)) for c in bgrid for x in c.points), default=0.0)
    residuals = reduced if hypothesis_ok else full
    return ResidualReport.from_residuals("gauss-reduction", residuals, tolerance, diagnostics=diagnostics,
                                         hypothesis_ok=hypothesis_ok)


def thm1_estimate(ws: WeightedSpace, u: ScalarField, c0: Optional[float], c1: Optional[float], grid, bgrid,
                  hypothesis_tolerance: float = 1e-6, vanishing_tolerance: float = 1e-6) -> InequalityReport:
    """
    (c0 + c1) Σ_α κ_α σ_f(Γ_α) < Σ_α κ_α ∫_{Γ_α} (ℛ_f^∂ - c1 f) dσ_f

    c0, c1 are fitted from ℛ_f against f when not given; the fit residual and
    ∂_ν f are reported and both sides are evaluated regardless.
    """
    model = ws.model
    points = list(grid.points)
    f_vals = np.array([ws.density(x) for x in points])
    Rf_vals = np.array([perelman_scalar(ws, x) for x in points])
    fitted = c0 is None or c1 is None
    if fitted:
        c0, c1 = fit_affine(Rf_vals, f_vals)
    fit_residual = float(np.max(np.abs(Rf_vals - (c0 + c1 * f_vals)))) if points else 0.0
    _check_nonnegative(u, grid, vanishing_tolerance)
    gravities = {g.component: g for g in surface_gravity(ws, u, bgrid, vanishing_tolerance)}
    areas = weighted_areas(ws, bgrid)

    spaces = {}

    def boundary_term(comp, x, s):
        if comp.param_dim == 0:
            return -c1 * ws.density(x)
        if comp.name not in spaces:
            spaces[comp.name] = boundary_space(ws, comp)
        return perelman_scalar(spaces[comp.name], s) - c1 * ws.density(x)

    integrals = weighted_boundary_integral(ws, boundary_term, bgrid)
    lhs = (c0 + c1) * sum(gravities[name].kappa * areas[name] for name in areas)
    rhs = sum(gravities[name].kappa * integrals[name] for name in integrals)
    normal_f = max((abs(float(ws.density.partials(x, ws.policy) @ unit_normal(model, model.boundary.component(c.name), x)))
                    for c in bgrid for x in c.points), default=0.0)
    hypothesis_ok = fit_residual < hypothesis_tolerance and normal_f < hypothesis_tolerance
    if not hypothesis_ok:
        logger.warning(f"thm1-estimate hypotheses off: ℛ_f fit {fit_residual:.3e}, ∂_ν f {normal_f:.3e}")
    diagnostics = {"c0": c0, "c1": c1, "fitted": fitted, "perelman_fit_residual": fit_residual,
                   "normal_derivative_f": normal_f,
                   "surface_gravity": [g.to_dict() for g in gravities.values()]}
    return InequalityReport("thm1-estimate", lhs, rhs, grid_size=len(grid) + len(bgrid),
                            hypothesis_ok=hypothesis_ok, diagnostics=diagnostics)
