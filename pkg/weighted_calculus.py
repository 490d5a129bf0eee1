"""
Weighted operator stack on a smooth metric measure space (Σ, g, e^{-f} dVol)

Drift Laplacian, Bakry-Émery Ricci tensor, Perelman scalar curvature,
f-divergences, the formal adjoint of the linearized Perelman scalar
curvature and the traceless projection. Density and potential presets are
compiled from sympy expressions so their partials are analytic.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import sympy as sp

from exceptions import MalformedScenarioError, UnknownIdentifierError
from expressions import compile_scalar, embedding_inner, parse_expression
from fields import ScalarField, SymTensorField, VectorField, coords_of
from settings import FIELD_PRESETS
from tensor_calculus import (
    div_tensor,
    div_tensor_partials,
    div_vector,
    gradient,
    gradient_field,
    hessian,
    hessian_field,
    laplacian,
    local_geometry,
    ricci,
    scalar_curvature,
    tensor_norm,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """A metric model paired with a density f; measure dVol_f = e^{-f} dVol"""
    model: object
    density: ScalarField

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def policy(self):
        return self.model.fd_policy

    def weight(self, x) -> float:
        """e^{-f(x)}, checked finite"""
        w = math.exp(-self.density(x))
        if not math.isfinite(w) or w <= 0.0:
            raise FloatingPointError(f"Weight e^-f is not finite and positive at {tuple(coords_of(x))}")
        return w

    def measure_factor(self, x) -> float:
        """√det g · e^{-f}"""
        return self.model.volume_factor(x) * self.weight(x)

    def with_density(self, density: ScalarField) -> "WeightedSpace":
        return replace(self, density=density)

    def with_model(self, model) -> "WeightedSpace":
        return replace(self, model=model)


@dataclass(frozen=True, eq=False)
class SigmaField:
    """σ with dℛ_f = -2σ df, defined only where |df|_g exceeds the threshold"""
    value: Callable
    mask: Callable
    threshold: float

    def __call__(self, x) -> float:
        if not self.mask(x):
            return float("nan")
        return float(self.value(x))


def density_gradient(ws: WeightedSpace, x) -> np.ndarray:
    return gradient(ws.model, ws.density, x)


def drift_laplacian(ws: WeightedSpace, u: ScalarField, x) -> float:
    """Δ_f u = Δu - ⟨∇f, ∇u⟩"""
    return laplacian(ws.model, u, x) - float(ws.density.partials(x, ws.policy) @ gradient(ws.model, u, x))


def drift_laplacian_divergence_form(ws: WeightedSpace, u: ScalarField, x) -> float:
    """
    e^f div(e^{-f} ∇u) through the volume form, without Christoffel symbols

    e^f (1/√g) ∂_k(√g e^{-f} g^{kj} ∂_j u)
        = ∂_k g^{kj} ∂_j u + g^{kj} ∂_k∂_j u + (½ g^{ab} ∂_k g_ab - ∂_k f) g^{kj} ∂_j u
    """
    geo = local_geometry(ws.model, x)
    du = u.partials(x, ws.policy)
    d2u = u.second_partials(x, ws.policy)
    df = ws.density.partials(x, ws.policy)
    log_volume = 0.5 * np.einsum('ab,kab->k', geo.ginv, geo.dg)
    return float(np.einsum('kkj,j->', geo.dginv, du)
                 + np.einsum('kj,kj->', geo.ginv, d2u)
                 + (log_volume - df) @ geo.ginv @ du)


def bakry_emery_ricci(ws: WeightedSpace, x) -> np.ndarray:
    """Ric_f = Ric + ∇²f"""
    return ricci(ws.model, x) + hessian(ws.model, ws.density, x)


def perelman_scalar(ws: WeightedSpace, x) -> float:
    """ℛ_f = R + 2Δf - |∇f|²"""
    df = ws.density.partials(x, ws.policy)
    return (scalar_curvature(ws.model, x) + 2.0 * laplacian(ws.model, ws.density, x)
            - float(df @ gradient(ws.model, ws.density, x)))


def perelman_scalar_field(ws: WeightedSpace) -> ScalarField:
    """ℛ_f as a field; its partials fall back to finite differences"""
    return ScalarField(value=lambda x: perelman_scalar(ws, x), label="Rf")


def bakry_emery_trace(ws: WeightedSpace, x) -> float:
    """tr_g Ric_f = R + Δf"""
    return scalar_curvature(ws.model, x) + laplacian(ws.model, ws.density, x)


def bakry_emery_ricci_field(ws: WeightedSpace) -> SymTensorField:
    """Ric_f as a tensor field with finite-difference partials"""
    return SymTensorField(value=lambda x: bakry_emery_ricci(ws, x), label="Ric_f")


def traceless_ricci_field(ws: WeightedSpace) -> SymTensorField:
    return SymTensorField(value=lambda x: traceless(ws, bakry_emery_ricci(ws, x), x), label="traceless Ric_f")


def weight_field(ws: WeightedSpace) -> ScalarField:
    """e^{-f} with analytic partials from those of f"""
    f = ws.density
    policy = ws.policy

    def value(x):
        return math.exp(-f(x))

    def d1(x):
        return -math.exp(-f(x)) * f.partials(x, policy)

    def d2(x):
        df = f.partials(x, policy)
        return math.exp(-f(x)) * (np.outer(df, df) - f.second_partials(x, policy))

    return ScalarField(value=value, d1=d1, d2=d2, label="exp(-f)")


def f_divergence_vector(ws: WeightedSpace, X: VectorField, x) -> float:
    """div_f X = div X - ⟨∇f, X⟩"""
    return div_vector(ws.model, X, x) - float(ws.density.partials(x, ws.policy) @ X(x))


def f_divergence_oneform(ws: WeightedSpace, omega, domega, x) -> float:
    """div_f ω = g^{ij} ∇_i ω_j - ω(∇f), domega[i, j] = ∂_i ω_j"""
    geo = local_geometry(ws.model, x)
    nabla = np.asarray(domega) - np.einsum('pij,p->ij', geo.christoffel, omega)
    return float(np.einsum('ij,ij->', geo.ginv, nabla) - omega @ density_gradient(ws, x))


def f_divergence_tensor(ws: WeightedSpace, h: SymTensorField, x) -> np.ndarray:
    """(div_f h)_j = (div h)_j - h(∇f, ·)_j"""
    return div_tensor(ws.model, h, x) - np.einsum('ij,i->j', h(x), density_gradient(ws, x))


def f_divergence_tensor_partials(ws: WeightedSpace, h: SymTensorField, x) -> np.ndarray:
    """∂_m (div_f h)_j, indexed [m, j]"""
    grad_f = gradient_field(ws.model, ws.density)
    return (div_tensor_partials(ws.model, h, x)
            - np.einsum('mij,i->mj', h.partials(x, ws.policy), grad_f(x))
            - np.einsum('ij,mi->mj', h(x), grad_f.partials(x, ws.policy)))


def f_divergence_twice(ws: WeightedSpace, h: SymTensorField, x) -> float:
    """div_f(div_f h)"""
    return f_divergence_oneform(ws, f_divergence_tensor(ws, h, x), f_divergence_tensor_partials(ws, h, x), x)


def adjoint_operator(ws: WeightedSpace, u: ScalarField, x) -> np.ndarray:
    """(δℛ_f)* u = -(Δ_f u) g + ∇²u - u Ric_f"""
    g = local_geometry(ws.model, x).g
    return -drift_laplacian(ws, u, x) * g + hessian(ws.model, u, x) - u(x) * bakry_emery_ricci(ws, x)


def traceless(ws: WeightedSpace, T, x) -> np.ndarray:
    """∘T = T - (tr_g T / n) g; T is a matrix or a SymTensorField"""
    geo = local_geometry(ws.model, x)
    T = T(x) if isinstance(T, SymTensorField) else np.asarray(T, dtype=float)
    return T - (np.einsum('ij,ij->', geo.ginv, T) / ws.dim) * geo.g


def trace_identity_residual(ws: WeightedSpace, u: ScalarField, x) -> float:
    """
    -(n-1)Δ_f u + div_f(u∇f) - ℛ_f u

    Zero for kernel elements of (δℛ_f)*: it equals the g-trace of the
    adjoint operator.
    """
    grad_f = gradient_field(ws.model, ws.density)
    u_grad_f = VectorField(
        value=lambda y: u(y) * grad_f(y),
        d1=lambda y: np.outer(u.partials(y, ws.policy), grad_f(y)) + u(y) * grad_f.partials(y, ws.policy),
    )
    n = ws.dim
    return (-(n - 1) * drift_laplacian(ws, u, x) + f_divergence_vector(ws, u_grad_f, x)
            - perelman_scalar(ws, x) * u(x))


def kernel_residual(ws: WeightedSpace, u: ScalarField, points: Iterable) -> float:
    """sup over points of |(δℛ_f)* u|_g"""
    worst = 0.0
    for x in points:
        worst = max(worst, tensor_norm(ws.model, adjoint_operator(ws, u, x), x))
    return worst


def kernel_tolerance(ws: WeightedSpace, u: ScalarField, points, analytic_tol: float = 1e-6,
                     fd_tol: float = 1e-3) -> float:
    """Acceptance threshold for numerical kernel membership"""
    analytic = ws.model.has_analytic_derivatives and u.has_analytic(2) and ws.density.has_analytic(2)
    scale = 1.0 + max((abs(u(x)) for x in points), default=0.0)
    return (analytic_tol if analytic else fd_tol) * scale


def field_from_preset(model, preset: str, value: Optional[float] = None, vector: Optional[Sequence[float]] = None,
                      expression: Optional[str] = None, shift: float = 0.0, label: str = "f",
                      order: int = 3) -> ScalarField:
    """
    Density or potential by preset name

    zero, constant (value), linear (⟨x, v⟩ on the embedding when the model has
    one, else on chart coordinates), gaussian (|x|²/2 in chart coordinates),
    expr (arithmetic in the chart coordinates).
    """
    if preset not in FIELD_PRESETS:
        raise UnknownIdentifierError("field preset", preset, FIELD_PRESETS)
    symbols = model.symbols
    if preset == "zero":
        expr = sp.Integer(0)
    elif preset == "constant":
        if value is None:
            raise MalformedScenarioError(f"Preset 'constant' for {label} needs a value")
        expr = sp.Float(value)
    elif preset == "linear":
        if vector is None:
            raise MalformedScenarioError(f"Preset 'linear' for {label} needs a vector")
        ambient = model.embedding if model.embedding is not None else symbols
        expr = embedding_inner(ambient, vector)
    elif preset == "gaussian":
        expr = sp.Add(*[s ** 2 for s in symbols]) / 2
    else:
        if not expression:
            raise MalformedScenarioError(f"Preset 'expr' for {label} needs an expression")
        expr = parse_expression(expression, symbols)
    if shift:
        expr = expr + sp.Float(shift)
    return compile_scalar(expr, symbols, order=order, label=label)


def field_expression(model, preset: str, value=None, vector=None, expression=None, shift: float = 0.0):
    """The sympy expression behind a preset, for callers that build on it symbolically"""
    if preset == "zero":
        return sp.Integer(0)
    if preset == "constant":
        return sp.Float(value)
    if preset == "linear":
        ambient = model.embedding if model.embedding is not None else model.symbols
        return embedding_inner(ambient, vector) + sp.Float(shift)
    if preset == "gaussian":
        return sp.Add(*[s ** 2 for s in model.symbols]) / 2 + sp.Float(shift)
    return parse_expression(expression, model.symbols) + sp.Float(shift)


def drift_laplacian_field(ws: WeightedSpace, u: ScalarField) -> ScalarField:
    """Δ_f u as a field; analytic first partials when u has third partials and the metric is analytic"""
    model, f, policy = ws.model, ws.density, ws.policy
    d1 = None
    if u.has_analytic(3) and f.has_analytic(2) and model.has_analytic_derivatives:
        hess = hessian_field(model, u)

        def d1(x):
            geo = local_geometry(model, x)
            du, d2u = u.partials(x, policy), u.second_partials(x, policy)
            df, d2f = f.partials(x, policy), f.second_partials(x, policy)
            return (np.einsum('mij,ij->m', geo.dginv, hess(x))
                    + np.einsum('ij,mij->m', geo.ginv, hess.partials(x, policy))
                    - np.einsum('mi,ij,j->m', d2f, geo.ginv, du)
                    - np.einsum('i,mij,j->m', df, geo.dginv, du)
                    - np.einsum('i,ij,mj->m', df, geo.ginv, d2u))

    return ScalarField(value=lambda x: drift_laplacian(ws, u, x), d1=d1, label=f"drift lap {u.label}")


def gradient_norm_field(model, v: ScalarField) -> ScalarField:
    """|∇v|² = g^{ij} ∂_i v ∂_j v, with analytic partials up to order two when v has third partials"""
    policy = model.fd_policy

    def value(x):
        dv = v.partials(x, policy)
        return float(dv @ local_geometry(model, x).ginv @ dv)

    if not (v.has_analytic(3) and model.has_analytic_derivatives):
        return ScalarField(value=value, label=f"|grad {v.label}|^2")

    def d1(x):
        geo = local_geometry(model, x)
        dv, d2v = v.partials(x, policy), v.second_partials(x, policy)
        return np.einsum('mij,i,j->m', geo.dginv, dv, dv) + 2.0 * np.einsum('ij,mi,j->m', geo.ginv, d2v, dv)

    def d2(x):
        geo = local_geometry(model, x)
        dv, d2v, d3v = v.partials(x, policy), v.second_partials(x, policy), v.third_partials(x, policy)
        out = (np.einsum('lmij,i,j->lm', geo.d2ginv, dv, dv)
               + 2.0 * np.einsum('mij,li,j->lm', geo.dginv, d2v, dv)
               + 2.0 * np.einsum('lij,mi,j->lm', geo.dginv, d2v, dv)
               + 2.0 * np.einsum('ij,lmi,j->lm', geo.ginv, d3v, dv)
               + 2.0 * np.einsum('ij,mi,lj->lm', geo.ginv, d2v, d2v))
        return 0.5 * (out + out.T)

    return ScalarField(value=value, d1=d1, d2=d2, label=f"|grad {v.label}|^2")
