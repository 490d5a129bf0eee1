"""
First variations of Δf, |∇f|², R and ℛ_f under g ↦ g + t·h

The closed-form variations are checked against a numeric oracle that
rebuilds the perturbed metric and recomputes its connection from scratch,
and against the L²_f duality with the adjoint operator.
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from exceptions import (
    PerturbationNotPositiveDefiniteError,
    PotentialNotVanishingError,
    UnknownIdentifierError,
    UnsupportedBoundaryError,
)
from fields import SymTensorField, coords_of
from settings import VARIATION_QUANTITIES
from tensor_calculus import (
    div_tensor,
    double_divergence,
    gradient,
    hessian,
    laplacian,
    local_geometry,
    ricci,
    scalar_curvature,
    tensor_inner,
    trace_field,
)
from weighted_calculus import (
    WeightedSpace,
    adjoint_operator,
    bakry_emery_ricci,
    drift_laplacian,
    f_divergence_twice,
    perelman_scalar,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MetricPerturbation:
    """Direction h of a metric variation and the step of the numeric oracle"""
    h: SymTensorField
    t_step: float = 1e-4
    compact_support: bool = False

    def __post_init__(self):
        if not self.t_step > 0.0:
            raise ValueError(f"t_step must be positive, got {self.t_step}")


def perturbed_model(model, h: SymTensorField, t: float):
    """The model with metric g + t·h; analytic partials carried over when both sides have them"""
    policy = model.fd_policy
    t = float(t)

    def metric_at(x):
        return model._raw_metric(x) + t * h(x)

    d1 = d2 = None
    if model.metric_d1 is not None:
        def d1(x):
            return model.metric_partials(x) + t * h.partials(x, policy)
    if model.metric_d2 is not None:
        def d2(x):
            return model.metric_second_partials(x) + t * h.second_partials(x, policy)

    return replace(model, name=f"{model.name}+{t:g}h", metric_at=metric_at, metric_d1=d1, metric_d2=d2,
                   metric_expr=None)


def check_perturbation(model, pert: MetricPerturbation, points: Iterable) -> None:
    """Raise unless g ± t_step·h is positive-definite at every point"""
    for x in points:
        g = local_geometry(model, x).g
        hx = pert.h(x)
        for sign in (1.0, -1.0):
            try:
                np.linalg.cholesky(g + sign * pert.t_step * hx)
            except np.linalg.LinAlgError as e:
                raise PerturbationNotPositiveDefiniteError(
                    f"g {'+' if sign > 0 else '-'} {pert.t_step:g}·h is not positive-definite "
                    f"at {tuple(coords_of(x))}"
                ) from e


def variation_laplacian_f(ws: WeightedSpace, pert: MetricPerturbation, x) -> float:
    """δ_h Δf = -⟨∇²f, h⟩ - ⟨∇f, div h⟩ + ½⟨∇f, ∇ tr h⟩"""
    model, f, h = ws.model, ws.density, pert.h
    grad_f = gradient(model, f, x)
    dtr = trace_field(model, h).partials(x, model.fd_policy)
    return (-tensor_inner(model, hessian(model, f, x), h(x), x)
            - float(div_tensor(model, h, x) @ grad_f)
            + 0.5 * float(grad_f @ dtr))


def variation_gradnorm(ws: WeightedSpace, pert: MetricPerturbation, x) -> float:
    """δ_h |∇f|² = -h(∇f, ∇f)"""
    grad_f = gradient(ws.model, ws.density, x)
    return -float(grad_f @ pert.h(x) @ grad_f)


def variation_scalar(ws: WeightedSpace, pert: MetricPerturbation, x) -> float:
    """δ_h R = -Δ tr h + div div h - ⟨h, Ric⟩"""
    model, h = ws.model, pert.h
    return (-laplacian(model, trace_field(model, h), x)
            + double_divergence(model, h, x)
            - tensor_inner(model, h(x), ricci(model, x), x))


def linearized_perelman(ws: WeightedSpace, pert: MetricPerturbation, x) -> float:
    """δ_h ℛ_f = -Δ_f tr h - ⟨h, Ric_f⟩ + div_f div_f h"""
    model, h = ws.model, pert.h
    return (-drift_laplacian(ws, trace_field(model, h), x)
            - tensor_inner(model, h(x), bakry_emery_ricci(ws, x), x)
            + f_divergence_twice(ws, h, x))


def linearized_perelman_expanded(ws: WeightedSpace, pert: MetricPerturbation, x) -> float:
    """
    Term-by-term form of δ_h ℛ_f:

    -Δ tr h + div div h - ⟨h, Ric⟩ - 2⟨h, ∇²f⟩ - 2⟨∇f, div h⟩ + ⟨∇f, ∇ tr h⟩ + h(∇f, ∇f)
    """
    model, f, h = ws.model, ws.density, pert.h
    hx = h(x)
    grad_f = gradient(model, f, x)
    tr_h = trace_field(model, h)
    return (-laplacian(model, tr_h, x)
            + double_divergence(model, h, x)
            - tensor_inner(model, hx, ricci(model, x), x)
            - 2.0 * tensor_inner(model, hx, hessian(model, f, x), x)
            - 2.0 * float(div_tensor(model, h, x) @ grad_f)
            + float(grad_f @ tr_h.partials(x, model.fd_policy))
            + float(grad_f @ hx @ grad_f))


def _quantity(name: str) -> Callable:
    def laplacian_f(model, f, x):
        return laplacian(model, f, x)

    def grad_norm(model, f, x):
        df = f.partials(x, model.fd_policy)
        return float(df @ local_geometry(model, x).ginv @ df)

    def scalar(model, f, x):
        return scalar_curvature(model, x)

    def perelman(model, f, x):
        return perelman_scalar(WeightedSpace(model, f), x)

    table: Dict[str, Callable] = {
        "laplacian-f": laplacian_f,
        "grad-norm": grad_norm,
        "scalar-curvature": scalar,
        "perelman-scalar": perelman,
    }
    if name not in table:
        raise UnknownIdentifierError("variation quantity", name, VARIATION_QUANTITIES)
    return table[name]


CLOSED_FORMS = {
    "laplacian-f": variation_laplacian_f,
    "grad-norm": variation_gradnorm,
    "scalar-curvature": variation_scalar,
    "perelman-scalar": linearized_perelman,
}


def numeric_variation(ws: WeightedSpace, pert: MetricPerturbation, quantity: str, x,
                      t_step: Optional[float] = None) -> float:
    """
    Central t-derivative of a quantity of g + t·h at t = 0, one Richardson level

    The perturbed metric is rebuilt for every t, so the oracle shares no
    linearized connection with the closed forms.
    """
    q = _quantity(quantity)
    t = pert.t_step if t_step is None else t_step

    def central(step):
        plus = q(perturbed_model(ws.model, pert.h, step), ws.density, x)
        minus = q(perturbed_model(ws.model, pert.h, -step), ws.density, x)
        return (plus - minus) / (2.0 * step)

    coarse = central(t)
    return (4.0 * central(0.5 * t) - coarse) / 3.0


def _duality_supported(ws: WeightedSpace, u, pert: MetricPerturbation, bgrid, tolerance: float) -> None:
    model = ws.model
    if model.closed or pert.compact_support:
        return
    if model.boundary is None:
        raise UnsupportedBoundaryError(
            f"Model '{model.name}' is neither closed nor bounded; duality needs a compactly supported h"
        )
    if bgrid is None:
        raise UnsupportedBoundaryError(f"Model '{model.name}' has a boundary; pass a boundary grid to check u = 0 there")
    worst = max((abs(u(p)) for comp in bgrid for p in comp.points), default=0.0)
    if worst > tolerance:
        raise PotentialNotVanishingError(f"u reaches {worst:.3e} on the boundary of '{model.name}'")


def adjoint_duality_check(ws: WeightedSpace, u, pert: MetricPerturbation, grid, tolerance: float = 1e-6,
                          bgrid=None):
    """
    ⟨(δℛ_f)* u, h⟩_{L²_f} against ⟨u, δ_h ℛ_f⟩_{L²_f} by quadrature

    The residual is |lhs - rhs| / (1 + |rhs|).
    """
    from identity_suite import ResidualReport

    _duality_supported(ws, u, pert, bgrid, tolerance)
    model = ws.model
    lhs = 0.0
    rhs = 0.0
    for x, w in zip(grid.points, grid.weights):
        factor = w * ws.measure_factor(x)
        lhs += factor * tensor_inner(model, adjoint_operator(ws, u, x), pert.h(x), x)
        rhs += factor * u(x) * linearized_perelman(ws, pert, x)
    gap = abs(lhs - rhs) / (1.0 + abs(rhs))
    logger.debug(f"Adjoint duality on '{model.name}': lhs={lhs:.6e}, rhs={rhs:.6e}")
    return ResidualReport.scalar(
        "adjoint-duality",
        gap,
        tolerance,
        grid_size=len(grid),
        diagnostics={"lhs": lhs, "rhs": rhs},
    )


def variation_oracle_residuals(ws: WeightedSpace, pert: MetricPerturbation, points: Iterable,
                               quantities=VARIATION_QUANTITIES) -> Dict[str, np.ndarray]:
    """Relative gaps |closed - numeric| / (1 + |numeric|) per quantity and point"""
    points = list(points)
    out = {}
    for name in quantities:
        closed = CLOSED_FORMS[name]
        gaps = []
        for x in points:
            exact = closed(ws, pert, x)
            oracle = numeric_variation(ws, pert, name, x)
            gaps.append(abs(exact - oracle) / (1.0 + abs(oracle)))
        out[name] = np.asarray(gaps)
    return out
