"""
Levi-Civita calculus on a chart

Christoffel symbols, Ricci and scalar curvature, gradient, Hessian,
Laplacian and divergences, all computed from the metric components and
their first and second partials. Curvature derivatives go through the
analytic partials of Γ; nothing here differences Γ itself.

Index layout: d1[m, ...] = ∂_m(...); Γ[k, i, j] = Γ^k_ij.
"""
import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from fields import ScalarField, SymTensorField, VectorField, coords_of

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class LocalGeometry:
    """Metric data at one chart point, derived quantities computed on demand"""
    g: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray

    @cached_property
    def ginv(self) -> np.ndarray:
        ginv = np.linalg.inv(self.g)
        return 0.5 * (ginv + ginv.T)

    @cached_property
    def dginv(self) -> np.ndarray:
        # ∂_m g^{kl} = -g^{ka} ∂_m g_ab g^{bl}
        return -np.einsum('ka,mab,bl->mkl', self.ginv, self.dg, self.ginv)

    @cached_property
    def d2ginv(self) -> np.ndarray:
        ginv, dginv, dg = self.ginv, self.dginv, self.dg
        return -(np.einsum('lia,mab,bj->lmij', dginv, dg, ginv)
                 + np.einsum('ia,lmab,bj->lmij', ginv, self.d2g, ginv)
                 + np.einsum('ia,mab,lbj->lmij', ginv, dg, dginv))

    @cached_property
    def first_kind(self) -> np.ndarray:
        # S[l,i,j] = ∂_i g_lj + ∂_j g_li - ∂_l g_ij
        dg = self.dg
        return np.einsum('ilj->lij', dg) + np.einsum('jli->lij', dg) - dg

    @cached_property
    def christoffel(self) -> np.ndarray:
        gamma = 0.5 * np.einsum('kl,lij->kij', self.ginv, self.first_kind)
        return 0.5 * (gamma + gamma.transpose(0, 2, 1))

    @cached_property
    def christoffel_partials(self) -> np.ndarray:
        d2g = self.d2g
        dS = np.einsum('milj->mlij', d2g) + np.einsum('mjli->mlij', d2g) - d2g
        dgamma = 0.5 * (np.einsum('mkl,lij->mkij', self.dginv, self.first_kind)
                        + np.einsum('kl,mlij->mkij', self.ginv, dS))
        return 0.5 * (dgamma + dgamma.transpose(0, 1, 3, 2))

    @cached_property
    def ricci(self) -> np.ndarray:
        G, dG = self.christoffel, self.christoffel_partials
        ric = (np.einsum('aaij->ij', dG) - np.einsum('jaai->ij', dG)
               + np.einsum('aae,eij->ij', G, G) - np.einsum('aje,eai->ij', G, G))
        return 0.5 * (ric + ric.T)

    @cached_property
    def scalar_curvature(self) -> float:
        return float(np.einsum('ij,ij->', self.ginv, self.ricci))


@lru_cache(maxsize=4096)
def _local_geometry(model, coords: tuple) -> LocalGeometry:
    x = np.asarray(coords, dtype=float)
    return LocalGeometry(
        g=model.metric(x),
        dg=model.metric_partials(x),
        d2g=model.metric_second_partials(x),
    )


def local_geometry(model, x) -> LocalGeometry:
    """Cached metric data at x; raises ChartDomainError or MetricNotPositiveDefiniteError"""
    return _local_geometry(model, tuple(coords_of(x).tolist()))


def christoffel(model, x) -> np.ndarray:
    """Γ^k_ij from the Levi-Civita formula, symmetric in (i, j)"""
    return local_geometry(model, x).christoffel


def christoffel_partials(model, x) -> np.ndarray:
    """∂_m Γ^k_ij, indexed [m, k, i, j]"""
    return local_geometry(model, x).christoffel_partials


def inverse_metric_partials(model, x) -> np.ndarray:
    return local_geometry(model, x).dginv


def ricci(model, x) -> np.ndarray:
    """Ric_ij, signed so the round sphere has positive Ricci"""
    return local_geometry(model, x).ricci


def scalar_curvature(model, x) -> float:
    return local_geometry(model, x).scalar_curvature


def gradient(model, u: ScalarField, x) -> np.ndarray:
    """(∇u)^i = g^{ij} ∂_j u"""
    geo = local_geometry(model, x)
    return geo.ginv @ u.partials(x, model.fd_policy)


def gradient_field(model, u: ScalarField) -> VectorField:
    """∇u as a VectorField with ∂_m(∇u)^k = ∂_m g^{kj} ∂_j u + g^{kj} ∂_m∂_j u"""

    def value(x):
        return gradient(model, u, x)

    def d1(x):
        geo = local_geometry(model, x)
        du = u.partials(x, model.fd_policy)
        d2u = u.second_partials(x, model.fd_policy)
        return np.einsum('mkj,j->mk', geo.dginv, du) + np.einsum('kj,mj->mk', geo.ginv, d2u)

    return VectorField(value=value, d1=d1, label=f"grad {u.label}")


def hessian(model, u: ScalarField, x) -> np.ndarray:
    """∇²u_ij = ∂_i∂_j u - Γ^k_ij ∂_k u"""
    geo = local_geometry(model, x)
    hess = u.second_partials(x, model.fd_policy) - np.einsum('kij,k->ij', geo.christoffel, u.partials(x, model.fd_policy))
    return 0.5 * (hess + hess.T)


def laplacian(model, u: ScalarField, x) -> float:
    """Δu = tr_g ∇²u (negative spectrum)"""
    geo = local_geometry(model, x)
    return float(np.einsum('ij,ij->', geo.ginv, hessian(model, u, x)))


def inner(model, X, Y, x) -> float:
    """⟨X, Y⟩_g of contravariant vectors"""
    return float(X @ local_geometry(model, x).g @ Y)


def covector_inner(model, a, b, x) -> float:
    """⟨a, b⟩_g of covectors"""
    return float(a @ local_geometry(model, x).ginv @ b)


def tensor_inner(model, A, B, x) -> float:
    """⟨A, B⟩_g = g^{ik} g^{jl} A_ij B_kl"""
    ginv = local_geometry(model, x).ginv
    return float(np.einsum('ik,jl,ij,kl->', ginv, ginv, A, B))


def tensor_norm(model, A, x) -> float:
    return float(np.sqrt(max(tensor_inner(model, A, A, x), 0.0)))


def covector_norm(model, a, x) -> float:
    return float(np.sqrt(max(covector_inner(model, a, a, x), 0.0)))


def div_vector(model, X: VectorField, x) -> float:
    """div X = ∂_k X^k + Γ^k_kj X^j"""
    geo = local_geometry(model, x)
    return float(np.trace(X.partials(x, model.fd_policy)) + np.einsum('kkj,j->', geo.christoffel, X(x)))


def covariant_d_oneform(model, omega, domega, x) -> np.ndarray:
    """∇_i ω_j = ∂_i ω_j - Γ^p_ij ω_p, with domega[i, j] = ∂_i ω_j"""
    geo = local_geometry(model, x)
    return np.asarray(domega) - np.einsum('pij,p->ij', geo.christoffel, omega)


def covariant_d_tensor(model, h: SymTensorField, x) -> np.ndarray:
    """C[i,k,j] = ∇_i h_kj = ∂_i h_kj - Γ^p_ik h_pj - Γ^p_ij h_kp"""
    geo = local_geometry(model, x)
    G = geo.christoffel
    hx = h(x)
    return (h.partials(x, model.fd_policy)
            - np.einsum('pik,pj->ikj', G, hx)
            - np.einsum('pij,kp->ikj', G, hx))


def div_tensor(model, h: SymTensorField, x) -> np.ndarray:
    """(div h)_j = g^{ik} ∇_i h_kj"""
    geo = local_geometry(model, x)
    return np.einsum('ik,ikj->j', geo.ginv, covariant_d_tensor(model, h, x))


def div_tensor_partials(model, h: SymTensorField, x) -> np.ndarray:
    """∂_m (div h)_j, indexed [m, j], from the analytic partials of Γ and h"""
    geo = local_geometry(model, x)
    policy = model.fd_policy
    G, dG = geo.christoffel, geo.christoffel_partials
    hx, dh, d2h = h(x), h.partials(x, policy), h.second_partials(x, policy)
    C = covariant_d_tensor(model, h, x)
    dC = (d2h
          - np.einsum('mpik,pj->mikj', dG, hx) - np.einsum('pik,mpj->mikj', G, dh)
          - np.einsum('mpij,kp->mikj', dG, hx) - np.einsum('pij,mkp->mikj', G, dh))
    return np.einsum('mik,ikj->mj', geo.dginv, C) + np.einsum('ik,mikj->mj', geo.ginv, dC)


def double_divergence(model, h: SymTensorField, x) -> float:
    """div(div h) = g^{mj}(∂_m (div h)_j - Γ^p_mj (div h)_p)"""
    geo = local_geometry(model, x)
    nabla = covariant_d_oneform(model, div_tensor(model, h, x), div_tensor_partials(model, h, x), x)
    return float(np.einsum('mj,mj->', geo.ginv, nabla))


def trace_field(model, h: SymTensorField) -> ScalarField:
    """tr_g h as a ScalarField with analytic first and second partials"""
    policy = model.fd_policy

    def value(x):
        return float(np.einsum('ij,ij->', local_geometry(model, x).ginv, h(x)))

    def d1(x):
        geo = local_geometry(model, x)
        return np.einsum('mij,ij->m', geo.dginv, h(x)) + np.einsum('ij,mij->m', geo.ginv, h.partials(x, policy))

    def d2(x):
        geo = local_geometry(model, x)
        hx, dh = h(x), h.partials(x, policy)
        out = (np.einsum('lmij,ij->lm', geo.d2ginv, hx)
               + np.einsum('mij,lij->lm', geo.dginv, dh)
               + np.einsum('lij,mij->lm', geo.dginv, dh)
               + np.einsum('ij,lmij->lm', geo.ginv, h.second_partials(x, policy)))
        return 0.5 * (out + out.T)

    return ScalarField(value=value, d1=d1, d2=d2, label=f"tr {h.label}")


def metric_tensor_field(model) -> SymTensorField:
    """g itself as a SymTensorField"""
    return SymTensorField(
        value=lambda x: local_geometry(model, x).g,
        d1=lambda x: local_geometry(model, x).dg,
        d2=lambda x: local_geometry(model, x).d2g,
        label="g",
    )


def lie_derivative_metric(model, X: VectorField, x) -> np.ndarray:
    """(ℒ_X g)_ij = ∇_i X_j + ∇_j X_i"""
    geo = local_geometry(model, x)
    DX = X.partials(x, model.fd_policy) + np.einsum('kip,p->ik', geo.christoffel, X(x))
    lowered = DX @ geo.g
    return lowered + lowered.T


def apply_tensor(T, X) -> np.ndarray:
    """Covector T(X, ·)_j = T_ij X^i"""
    return np.einsum('ij,i->j', T, X)


def hessian_field(model, u: ScalarField) -> SymTensorField:
    """
    ∇²u as a SymTensorField

    With analytic third partials of u and analytic metric partials,
    ∂_m ∇²u_ij = ∂_m∂_i∂_j u - ∂_m Γ^k_ij ∂_k u - Γ^k_ij ∂_m∂_k u; otherwise the
    partials fall back to finite differences of the Hessian.
    """
    policy = model.fd_policy
    d1 = None
    if u.has_analytic(3) and model.has_analytic_derivatives:
        def d1(x):
            geo = local_geometry(model, x)
            d2u = u.second_partials(x, policy)
            out = (u.third_partials(x, policy)
                   - np.einsum('mkij,k->mij', geo.christoffel_partials, u.partials(x, policy))
                   - np.einsum('kij,mk->mij', geo.christoffel, d2u))
            return 0.5 * (out + out.transpose(0, 2, 1))

    return SymTensorField(value=lambda x: hessian(model, u, x), d1=d1, label=f"hess {u.label}")
