"""
Finite bases for the drift-Laplacian and adjoint discretizations

Every basis tabulates values, first and second chart partials at a set of
points, and knows the collocation grid its products are integrated on.
Dirichlet conditions are built into the basis (sine and Legendre families on
intervals, odd-parity harmonics on the hemisphere), never imposed by
penalties.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import sympy as sp
from numpy.polynomial import hermite_e, legendre

from exceptions import MalformedScenarioError, UnknownIdentifierError
from fields import ScalarField, coords_of
from quadrature import QuadratureGrid, gauss_legendre, polar_rule, trapezoid_periodic
from settings import BASIS_KINDS, INTERVAL_FAMILIES

logger = logging.getLogger(__name__)

# Extra quadrature nodes beyond what the basis products need
QUADRATURE_PADDING = 16
# Nodes per axis for Gauss-Hermite grids beyond the basis degree
HERMITE_PADDING = 20


@dataclass(frozen=True, eq=False)
class DiscreteBasis:
    """
    Base class: kind, size and tabulation

    tabulate(points) returns V[p,k], D1[p,k,i] = ∂_i φ_k, D2[p,k,i,j].
    """
    kind: str
    size: int
    dim: int
    labels: Tuple[str, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.labels)

    def tabulate(self, points) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def collocation_grid(self, model) -> QuadratureGrid:
        raise NotImplementedError

    def field(self, coefficients, label: str = "u") -> ScalarField:
        """Σ c_k φ_k as a ScalarField with analytic first and second partials"""
        c = np.asarray(coefficients, dtype=float)

        def at(x, which):
            return np.tensordot(self.tabulate(coords_of(x)[None, :])[which][0], c, axes=([0], [0]))

        return ScalarField(
            value=lambda x: float(at(x, 0)),
            d1=lambda x: at(x, 1),
            d2=lambda x: at(x, 2),
            label=label,
        )

    def index_of(self, label: str) -> int:
        if label not in self.labels:
            raise UnknownIdentifierError(f"{self.kind} label", label, self.labels)
        return self.labels.index(label)


@dataclass(frozen=True, eq=False)
class FourierCircleBasis(DiscreteBasis):
    """1, cos kθ, sin kθ for k ≤ K on the circle; size counts functions"""
    period: float = 2.0 * math.pi

    @property
    def max_frequency(self) -> int:
        return (self.size - 1) // 2

    def tabulate(self, points):
        theta = np.asarray(points, dtype=float).reshape(-1, 1)[:, 0]
        scale = 2.0 * math.pi / self.period
        cols_v, cols_d1, cols_d2 = [np.ones_like(theta)], [np.zeros_like(theta)], [np.zeros_like(theta)]
        for k in range(1, self.max_frequency + 1):
            w = k * scale
            c, s = np.cos(w * theta), np.sin(w * theta)
            cols_v += [c, s]
            cols_d1 += [-w * s, w * c]
            cols_d2 += [-w * w * c, -w * w * s]
        V = np.stack(cols_v, axis=1)
        return V, np.stack(cols_d1, axis=1)[:, :, None], np.stack(cols_d2, axis=1)[:, :, None, None]

    def collocation_grid(self, model) -> QuadratureGrid:
        lower, upper, _ = model.domain[0]
        m = 2 * self.size + QUADRATURE_PADDING
        nodes, weights = trapezoid_periodic(lower, upper, m)
        return QuadratureGrid(nodes[:, None], weights, rule="trapezoid", nodes=(m,))


@dataclass(frozen=True, eq=False)
class IntervalDirichletBasis(DiscreteBasis):
    """
    Functions vanishing at both ends of [lower, upper]

    family "sine": sin(kπs), s = (x - lower)/(upper - lower), k = 1..N.
    family "legendre": P_k(t) - P_{k+2}(t), t ∈ [-1, 1], normalized in L².
    """
    family: str = "sine"
    lower: float = 0.0
    upper: float = 1.0

    def tabulate(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, 1)[:, 0]
        length = self.upper - self.lower
        N = self.size
        if self.family == "sine":
            k = np.arange(1, N + 1) * math.pi / length
            arg = np.outer(x - self.lower, k)
            V = np.sin(arg)
            D1 = np.cos(arg) * k
            D2 = -V * k ** 2
        else:
            t = 2.0 * (x - self.lower) / length - 1.0
            C = _legendre_dirichlet_coefficients(N)
            stretch = 2.0 / length
            V = legendre.legvander(t, N + 1) @ C
            D1 = legendre.legvander(t, N) @ legendre.legder(C, 1, axis=0) * stretch
            D2 = legendre.legvander(t, N - 1) @ legendre.legder(C, 2, axis=0) * stretch ** 2
        return V, D1[:, :, None], D2[:, :, None, None]

    def collocation_grid(self, model) -> QuadratureGrid:
        m = 2 * self.size + 2 * QUADRATURE_PADDING
        nodes, weights = gauss_legendre(self.lower, self.upper, m)
        return QuadratureGrid(nodes[:, None], weights, rule="gauss-legendre", nodes=(m,))


@lru_cache(maxsize=16)
def _legendre_dirichlet_coefficients(N: int) -> np.ndarray:
    C = np.zeros((N + 2, N))
    for k in range(N):
        C[k, k] = 1.0
        C[k + 2, k] = -1.0
        C[:, k] /= math.sqrt(2.0 / (2 * k + 1) + 2.0 / (2 * k + 5))
    return C


@lru_cache(maxsize=128)
def _polar_factor(l: int, m: int):
    """sin(θ)^m · P_l^(m)(cos θ) and its first two θ-derivatives, vectorized"""
    theta, t = sp.symbols("theta t")
    expr = sp.sin(theta) ** m * sp.diff(sp.legendre(l, t), t, m).subs(t, sp.cos(theta))
    norm = math.sqrt((2 * l + 1) / (4.0 * math.pi) * math.factorial(l - m) / math.factorial(l + m))
    fns = [sp.lambdify(theta, e, "numpy") for e in (expr, sp.diff(expr, theta), sp.diff(expr, theta, 2))]

    def evaluate(values):
        return [norm * np.asarray(fn(values), dtype=float) * np.ones_like(values) for fn in fns]

    return evaluate


@dataclass(frozen=True, eq=False)
class SphereHarmonicBasis(DiscreteBasis):
    """
    Real spherical harmonics of degree ≤ L in the (θ, φ) chart of S²

    With dirichlet_equator only the harmonics with l - m odd are kept; they
    vanish on the equator and span the Dirichlet problem on the hemisphere.
    """
    dirichlet_equator: bool = False
    modes: Tuple[Tuple[int, int, str], ...] = ()

    def tabulate(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        theta, phi = pts[:, 0], pts[:, 1]
        P = pts.shape[0]
        N = len(self.modes)
        V = np.zeros((P, N))
        D1 = np.zeros((P, N, 2))
        D2 = np.zeros((P, N, 2, 2))
        for k, (l, m, part) in enumerate(self.modes):
            T0, T1, T2 = _polar_factor(l, m)(theta)
            if m == 0:
                c, dc, ddc = np.ones(P), np.zeros(P), np.zeros(P)
            elif part == "cos":
                c, dc, ddc = math.sqrt(2.0) * np.cos(m * phi), -m * math.sqrt(2.0) * np.sin(m * phi), -m * m * math.sqrt(2.0) * np.cos(m * phi)
            else:
                c, dc, ddc = math.sqrt(2.0) * np.sin(m * phi), m * math.sqrt(2.0) * np.cos(m * phi), -m * m * math.sqrt(2.0) * np.sin(m * phi)
            V[:, k] = T0 * c
            D1[:, k, 0] = T1 * c
            D1[:, k, 1] = T0 * dc
            D2[:, k, 0, 0] = T2 * c
            D2[:, k, 0, 1] = D2[:, k, 1, 0] = T1 * dc
            D2[:, k, 1, 1] = T0 * ddc
        return V, D1, D2

    def collocation_grid(self, model) -> QuadratureGrid:
        m = 2 * self.size + QUADRATURE_PADDING
        upper = math.pi / 2 if self.dirichlet_equator else math.pi
        t_nodes, t_weights = polar_rule(0.0, upper, m, 1)
        p_nodes, p_weights = trapezoid_periodic(0.0, 2.0 * math.pi, 2 * m)
        points = np.array([(a, b) for a in t_nodes for b in p_nodes])
        weights = np.array([wa * wb for wa in t_weights for wb in p_weights])
        return QuadratureGrid(points, weights, rule="polar", nodes=(m, 2 * m))


def _harmonic_modes(degree: int, dirichlet_equator: bool) -> List[Tuple[int, int, str]]:
    modes = []
    for l in range(degree + 1):
        for m in range(l + 1):
            if dirichlet_equator and (l - m) % 2 == 0:
                continue
            modes.append((l, m, "cos"))
            if m > 0:
                modes.append((l, m, "sin"))
    return modes


@dataclass(frozen=True, eq=False)
class HermiteChartBasis(DiscreteBasis):
    """Products of normalized probabilists' Hermite polynomials He_a(x_i)/√a! of total degree ≤ D"""
    multi_indices: Tuple[Tuple[int, ...], ...] = ()

    def tabulate(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        D = self.size
        norms = np.array([1.0 / math.sqrt(math.factorial(a)) for a in range(D + 1)])
        vals, der1, der2 = [], [], []
        for i in range(self.dim):
            H = hermite_e.hermevander(pts[:, i], D)
            dH = np.zeros_like(H)
            ddH = np.zeros_like(H)
            for a in range(1, D + 1):
                dH[:, a] = a * H[:, a - 1]
            for a in range(2, D + 1):
                ddH[:, a] = a * (a - 1) * H[:, a - 2]
            vals.append(H * norms)
            der1.append(dH * norms)
            der2.append(ddH * norms)
        P, N, n = pts.shape[0], len(self.multi_indices), self.dim
        V = np.ones((P, N))
        D1 = np.ones((P, N, n))
        D2 = np.ones((P, N, n, n))
        for k, alpha in enumerate(self.multi_indices):
            for i, a in enumerate(alpha):
                V[:, k] *= vals[i][:, a]
                for j in range(n):
                    D1[:, k, j] *= der1[i][:, a] if i == j else vals[i][:, a]
                    for l in range(n):
                        if i == j == l:
                            factor = der2[i][:, a]
                        elif i == j or i == l:
                            factor = der1[i][:, a]
                        else:
                            factor = vals[i][:, a]
                        D2[:, k, j, l] *= factor
        return V, D1, D2

    def collocation_grid(self, model) -> QuadratureGrid:
        """Gauss-Hermite nodes; weights carry e^{x²/2} back so the grid integrates against dx"""
        m = self.size + HERMITE_PADDING
        t, w = hermite_e.hermegauss(m)
        w = w * np.exp(0.5 * t ** 2)
        axes = np.meshgrid(*([t] * self.dim), indexing="ij")
        weight_axes = np.meshgrid(*([w] * self.dim), indexing="ij")
        points = np.stack([a.ravel() for a in axes], axis=1)
        weights = np.prod(np.stack([a.ravel() for a in weight_axes], axis=1), axis=1)
        return QuadratureGrid(points, weights, rule="gauss-hermite", nodes=(m,) * self.dim)


def _hermite_indices(dim: int, degree: int) -> List[Tuple[int, ...]]:
    indices = [alpha for alpha in np.ndindex(*([degree + 1] * dim)) if sum(alpha) <= degree]
    return sorted(indices, key=lambda alpha: (sum(alpha), tuple(-a for a in alpha)))


@dataclass(frozen=True, eq=False)
class GridFDBasis(DiscreteBasis):
    """
    Nodal basis on an equispaced 1-D grid with second-order difference derivatives

    Dirichlet on intervals (interior nodes only), periodic on circles. It can
    only be tabulated at its own nodes.
    """
    lower: float = 0.0
    upper: float = 1.0
    periodic: bool = False

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.size if self.periodic else self.size + 1)

    @property
    def nodes(self) -> np.ndarray:
        h = self.spacing
        if self.periodic:
            return self.lower + h * np.arange(self.size)
        return self.lower + h * np.arange(1, self.size + 1)

    def difference_matrices(self) -> Tuple[np.ndarray, np.ndarray]:
        N, h = self.size, self.spacing
        D1 = (np.eye(N, k=1) - np.eye(N, k=-1)) / (2.0 * h)
        D2 = (np.eye(N, k=1) - 2.0 * np.eye(N) + np.eye(N, k=-1)) / h ** 2
        if self.periodic:
            D1[0, -1], D1[-1, 0] = -1.0 / (2.0 * h), 1.0 / (2.0 * h)
            D2[0, -1] = D2[-1, 0] = 1.0 / h ** 2
        return D1, D2

    def tabulate(self, points):
        x = np.asarray(points, dtype=float).reshape(-1, 1)[:, 0]
        nodes = self.nodes
        rows = []
        for value in x:
            hit = np.flatnonzero(np.abs(nodes - value) < 1e-12 * max(1.0, abs(value)))
            if hit.size == 0:
                raise ValueError(f"grid-fd basis can only be evaluated at its nodes, got {value}")
            rows.append(int(hit[0]))
        D1, D2 = self.difference_matrices()
        V = np.eye(self.size)[rows]
        return V, D1[rows][:, :, None], D2[rows][:, :, None, None]

    def collocation_grid(self, model) -> QuadratureGrid:
        weights = np.full(self.size, self.spacing)
        return QuadratureGrid(self.nodes[:, None], weights, rule="grid-fd", nodes=(self.size,))


def build_basis(kind: str, model, size: int, family: Optional[str] = None) -> DiscreteBasis:
    """
    Registry lookup for discrete bases

    size is the number of functions for 1-D bases, the maximal harmonic
    degree for sphere-harmonic-chart and the total degree for hermite-chart.
    """
    if kind not in BASIS_KINDS:
        raise UnknownIdentifierError("basis", kind, BASIS_KINDS)
    if size < 1:
        raise MalformedScenarioError(f"Basis size must be positive, got {size}")
    if kind == "fourier-circle":
        if model.kind != "circle":
            raise MalformedScenarioError(f"fourier-circle needs the circle model, got '{model.name}'")
        lower, upper, _ = model.domain[0]
        labels = ["1"] + [f"{fn}{k}" for k in range(1, (size - 1) // 2 + 1) for fn in ("cos", "sin")]
        return FourierCircleBasis(kind, size, 1, tuple(labels), period=upper - lower)
    if kind == "interval-dirichlet":
        family = family or "sine"
        if family not in INTERVAL_FAMILIES:
            raise UnknownIdentifierError("interval family", family, INTERVAL_FAMILIES)
        if model.kind != "interval":
            raise MalformedScenarioError(f"interval-dirichlet needs the interval model, got '{model.name}'")
        lower, upper, _ = model.domain[0]
        labels = tuple(f"{family}{k}" for k in range(size))
        return IntervalDirichletBasis(kind, size, 1, labels, family=family, lower=lower, upper=upper)
    if kind == "sphere-harmonic-chart":
        if model.dim != 2 or model.kind not in ("sphere", "cap"):
            raise MalformedScenarioError("sphere-harmonic-chart needs sphere-spherical or hemisphere with dim = 2")
        dirichlet = model.kind == "cap"
        if dirichlet and abs(model.params.get("cap_angle", math.pi / 2) - math.pi / 2) > 1e-14:
            raise MalformedScenarioError("Dirichlet harmonics need the hemisphere bounded by the equator")
        modes = tuple(_harmonic_modes(size, dirichlet))
        labels = tuple(f"Y{l},{m}{'' if m == 0 else part[0]}" for l, m, part in modes)
        return SphereHarmonicBasis(kind, size, 2, labels, dirichlet_equator=dirichlet, modes=modes)
    if kind == "hermite-chart":
        if model.kind not in ("gaussian", "flat"):
            raise MalformedScenarioError(f"hermite-chart needs a flat chart, got '{model.name}'")
        indices = tuple(_hermite_indices(model.dim, size))
        labels = tuple("He" + ",".join(str(a) for a in alpha) for alpha in indices)
        return HermiteChartBasis(kind, size, model.dim, labels, multi_indices=indices)
    if model.kind not in ("interval", "circle"):
        raise MalformedScenarioError(f"grid-fd supports the interval and the circle, got '{model.name}'")
    lower, upper, periodic = model.domain[0]
    return GridFDBasis(kind, size, 1, tuple(f"node{k}" for k in range(size)),
                       lower=lower, upper=upper, periodic=bool(periodic))
