"""
Chart-based Riemannian manifold models

A MetricModel carries the metric components of one chart, optional analytic
partials, a chart-domain predicate and, for manifolds with boundary, a
BoundaryModel. The built-in registry covers flat space, round spheres in
spherical and stereographic charts, the hemisphere, circle, interval, the
flat slab and diagonal metrics given by expressions.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from exceptions import ChartDomainError, MalformedScenarioError, MetricNotPositiveDefiniteError, UnknownIdentifierError
from expressions import compile_metric, coordinate_symbols, parse_expression
from fields import coords_of
from finite_differences import DEFAULT_POLICY, StepPolicy, partials, second_partials
from settings import MODEL_NAMES

logger = logging.getLogger(__name__)

# Symmetry tolerance for metric components
SYMMETRY_TOL = 1e-12
# Slack on chart-domain predicates so boundary points stay inside
EDGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BoundaryComponent:
    """One connected component of ∂Σ, parameterized by (n-1) coordinates"""
    name: str
    param_dim: int
    parameterization: Callable
    outward_normal: Callable
    # (lower, upper, periodic) for each boundary parameter
    param_bounds: Tuple = ()
    tangents: Optional[Callable] = None

    def point(self, s) -> np.ndarray:
        return np.asarray(self.parameterization(np.atleast_1d(np.asarray(s, dtype=float))), dtype=float)

    def tangent_frame(self, s, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        """E[:, a] = ∂x/∂s_a, shape (n, n-1)"""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.param_dim == 0:
            return np.zeros((self.point(s).size, 0))
        if self.tangents is not None:
            return np.asarray(self.tangents(s), dtype=float)
        return partials(self.point, s, policy).T


@dataclass(frozen=True, eq=False)
class BoundaryModel:
    components: Tuple[BoundaryComponent, ...]

    @property
    def names(self):
        return [c.name for c in self.components]

    def component(self, name: str) -> BoundaryComponent:
        for c in self.components:
            if c.name == name:
                return c
        raise UnknownIdentifierError("boundary component", name, self.names)

    def parameterization(self, name: str, s) -> np.ndarray:
        return self.component(name).point(s)

    def outward_normal(self, name: str, x) -> np.ndarray:
        return np.asarray(self.component(name).outward_normal(coords_of(x)), dtype=float)


def _whole_chart(x) -> bool:
    return True


@dataclass(frozen=True, eq=False)
class MetricModel:
    name: str
    dim: int
    metric_at: Callable
    metric_d1: Optional[Callable] = None
    metric_d2: Optional[Callable] = None
    chart_contains: Callable = _whole_chart
    boundary: Optional[BoundaryModel] = None
    symbols: Tuple = ()
    metric_expr: Optional[sp.Matrix] = None
    embedding: Optional[Tuple] = None
    closed: bool = False
    kind: str = "custom"
    # Coordinate box (lower, upper, periodic) per axis used for default grids
    domain: Tuple = ()
    fd_policy: StepPolicy = DEFAULT_POLICY
    params: Dict = field(default_factory=dict)

    def contains(self, x) -> bool:
        x = coords_of(x)
        return x.size == self.dim and bool(self.chart_contains(x))

    def validate(self, x) -> np.ndarray:
        x = coords_of(x)
        if x.size != self.dim:
            raise ChartDomainError(f"Point has {x.size} coordinates, model '{self.name}' has dimension {self.dim}")
        if not self.chart_contains(x):
            raise ChartDomainError(f"Point {tuple(x)} lies outside the chart of model '{self.name}'")
        return x

    def _raw_metric(self, x) -> np.ndarray:
        return np.asarray(self.metric_at(coords_of(x)), dtype=float).reshape(self.dim, self.dim)

    def metric(self, x) -> np.ndarray:
        x = self.validate(x)
        g = self._raw_metric(x)
        if not np.allclose(g, g.T, atol=SYMMETRY_TOL, rtol=0.0):
            raise MetricNotPositiveDefiniteError(f"Metric of '{self.name}' is not symmetric at {tuple(x)}")
        g = 0.5 * (g + g.T)
        try:
            np.linalg.cholesky(g)
        except np.linalg.LinAlgError as e:
            raise MetricNotPositiveDefiniteError(
                f"Metric of '{self.name}' is not positive-definite at {tuple(x)}"
            ) from e
        return g

    @property
    def has_analytic_derivatives(self) -> bool:
        return self.metric_d1 is not None and self.metric_d2 is not None

    def metric_partials(self, x) -> np.ndarray:
        """d[m,i,j] = ∂_m g_ij"""
        x = coords_of(x)
        n = self.dim
        if self.metric_d1 is not None:
            return np.asarray(self.metric_d1(x), dtype=float).reshape(n, n, n)
        logger.debug(f"FD metric partials for '{self.name}'")
        return partials(self._raw_metric, x, self.fd_policy)

    def metric_second_partials(self, x) -> np.ndarray:
        """d[l,m,i,j] = ∂_l∂_m g_ij"""
        x = coords_of(x)
        n = self.dim
        if self.metric_d2 is not None:
            return np.asarray(self.metric_d2(x), dtype=float).reshape(n, n, n, n)
        logger.debug(f"FD metric second partials for '{self.name}'")
        if self.metric_d1 is not None:
            d = partials(self.metric_partials, x, self.fd_policy)
            return 0.5 * (d + d.transpose(1, 0, 2, 3))
        return second_partials(self._raw_metric, x, self.fd_policy)

    def inverse_metric(self, x) -> np.ndarray:
        ginv = np.linalg.inv(self.metric(x))
        return 0.5 * (ginv + ginv.T)

    def volume_factor(self, x) -> float:
        return float(math.sqrt(np.linalg.det(self.metric(x))))

    def embed(self, x) -> Optional[np.ndarray]:
        """Ambient coordinates of a chart point, when the model has an embedding"""
        if self.embedding is None:
            return None
        fn = sp.lambdify(self.symbols, list(self.embedding), "numpy")
        return np.array(fn(*coords_of(x)), dtype=float)

    def without_derivatives(self) -> "MetricModel":
        """Same model with analytic metric partials removed (finite-difference fallback)"""
        return replace(self, metric_d1=None, metric_d2=None)

    def with_fd_policy(self, policy: StepPolicy) -> "MetricModel":
        return replace(self, fd_policy=policy)


def _from_matrix(name, symbols, matrix, **kwargs) -> MetricModel:
    g, d1, d2 = compile_metric(matrix, symbols)
    return MetricModel(
        name=name,
        dim=len(symbols),
        metric_at=g,
        metric_d1=d1,
        metric_d2=d2,
        symbols=tuple(symbols),
        metric_expr=sp.Matrix(matrix),
        **kwargs,
    )


def euclidean_model(dim: int = 2, half_width: float = 1.0, name: str = "euclidean") -> MetricModel:
    """Flat ℝⁿ in Cartesian coordinates"""
    symbols = coordinate_symbols([f"x{i + 1}" for i in range(dim)])
    return _from_matrix(
        name,
        symbols,
        sp.eye(dim),
        embedding=tuple(symbols),
        kind="flat",
        domain=tuple((-half_width, half_width, False) for _ in range(dim)),
        params={"dim": dim, "half_width": half_width},
    )


def gaussian_chart_model(dim: int = 2, truncation: float = 6.0) -> MetricModel:
    """Euclidean chart truncated to [-L, L]ⁿ for Gaussian-weighted integrals"""
    model = euclidean_model(dim, truncation, name="gaussian-chart")
    return replace(model, kind="gaussian", params={"dim": dim, "truncation": truncation})


def _sphere_symbols(dim: int):
    if dim == 2:
        return coordinate_symbols(["theta", "phi"])
    return coordinate_symbols([f"a{i + 1}" for i in range(dim - 1)] + ["phi"])


def _sphere_metric_and_embedding(symbols, radius: float = 1.0):
    n = len(symbols)
    r = sp.Float(radius) if radius != 1.0 else sp.Integer(1)
    diag = []
    prefix = sp.Integer(1)
    for j in range(n):
        diag.append(r ** 2 * prefix ** 2)
        if j < n - 1:
            prefix = prefix * sp.sin(symbols[j])
    # prefix is now the product of sines of all polar angles
    embedding = [r * prefix * sp.cos(symbols[-1]), r * prefix * sp.sin(symbols[-1])]
    partial = [sp.Integer(1)]
    for j in range(n - 1):
        partial.append(partial[-1] * sp.sin(symbols[j]))
    for j in range(n - 2, -1, -1):
        embedding.append(r * partial[j] * sp.cos(symbols[j]))
    return sp.diag(*diag), tuple(embedding)


def _polar_angles_inside(x, upper_first=math.pi) -> bool:
    angles = x[:-1]
    if angles.size == 0:
        return True
    if not 0.0 < angles[0] <= upper_first + EDGE_TOL:
        return False
    return bool(np.all((angles[1:] > 0.0) & (angles[1:] < math.pi)))


def sphere_spherical_model(dim: int = 2, radius: float = 1.0) -> MetricModel:
    """Round Sⁿ in hyperspherical coordinates (a_1, ..., a_{n-1}, φ)"""
    symbols = _sphere_symbols(dim)
    matrix, embedding = _sphere_metric_and_embedding(symbols, radius)
    return _from_matrix(
        "sphere-spherical",
        symbols,
        matrix,
        chart_contains=lambda x: _polar_angles_inside(x) and x[0] < math.pi,
        embedding=embedding,
        closed=True,
        kind="sphere",
        domain=tuple([(0.0, math.pi, False)] * (dim - 1) + [(0.0, 2.0 * math.pi, True)]),
        params={"dim": dim, "radius": radius},
    )


def hemisphere_model(dim: int = 2, cap_angle: float = math.pi / 2) -> MetricModel:
    """
    Polar cap {a_1 ≤ cap_angle} of the unit sphere

    cap_angle = π/2 is the upper hemisphere bounded by the equator; larger
    angles give the sphere minus a cap around the south pole.
    """
    if not 0.0 < cap_angle < math.pi:
        raise MalformedScenarioError(f"cap_angle must lie in (0, π), got {cap_angle}")
    symbols = _sphere_symbols(dim)
    matrix, embedding = _sphere_metric_and_embedding(symbols)
    n = dim

    def rim(s):
        return np.concatenate(([cap_angle], np.asarray(s, dtype=float)))

    def normal(x):
        nu = np.zeros(n)
        nu[0] = 1.0
        return nu

    def tangents(s):
        E = np.zeros((n, n - 1))
        E[1:, :] = np.eye(n - 1)
        return E

    name = "equator" if abs(cap_angle - math.pi / 2) < 1e-14 else "rim"
    bounds = tuple([(0.0, math.pi, False)] * (n - 2) + [(0.0, 2.0 * math.pi, True)])
    boundary = BoundaryModel((BoundaryComponent(name, n - 1, rim, normal, bounds, tangents),))
    return _from_matrix(
        "hemisphere",
        symbols,
        matrix,
        chart_contains=lambda x: _polar_angles_inside(x, cap_angle),
        boundary=boundary,
        embedding=embedding,
        kind="cap",
        domain=tuple([(0.0, cap_angle, False)] + [(0.0, math.pi, False)] * (n - 2) + [(0.0, 2.0 * math.pi, True)]),
        params={"dim": dim, "cap_angle": cap_angle},
    )


def sphere_stereo_model(dim: int = 2, pole: str = "north", half_width: float = 2.0) -> MetricModel:
    """Round Sⁿ in the stereographic chart from the given pole"""
    if pole not in ("north", "south"):
        raise MalformedScenarioError(f"pole must be 'north' or 'south', got '{pole}'")
    symbols = coordinate_symbols([f"y{i + 1}" for i in range(dim)])
    rho2 = sp.Add(*[s ** 2 for s in symbols])
    conformal = 4 / (1 + rho2) ** 2
    sign = 1 if pole == "north" else -1
    embedding = tuple(2 * s / (1 + rho2) for s in symbols) + (sign * (rho2 - 1) / (1 + rho2),)
    return _from_matrix(
        "sphere-stereo",
        symbols,
        conformal * sp.eye(dim),
        embedding=embedding,
        closed=True,
        kind="stereo",
        domain=tuple((-half_width, half_width, False) for _ in range(dim)),
        params={"dim": dim, "pole": pole},
    )


def stereographic_transition(y) -> np.ndarray:
    """North-chart coordinates to south-chart coordinates (an involution y ↦ y/|y|²)"""
    y = coords_of(y)
    rho2 = float(np.dot(y, y))
    if rho2 == 0.0:
        raise ChartDomainError("The origin of one stereographic chart is the pole of the other")
    return y / rho2


def spherical_from_embedding(X) -> np.ndarray:
    """Chart point of sphere-spherical (n=2) for an ambient point of S²"""
    X = np.asarray(X, dtype=float)
    theta = math.acos(max(-1.0, min(1.0, X[2] / np.linalg.norm(X))))
    phi = math.atan2(X[1], X[0]) % (2.0 * math.pi)
    return np.array([theta, phi])


def circle_model(radius: float = 1.0) -> MetricModel:
    symbols = coordinate_symbols(["theta"])
    theta = symbols[0]
    return _from_matrix(
        "circle",
        symbols,
        sp.Matrix([[sp.Float(radius) ** 2]]),
        embedding=(radius * sp.cos(theta), radius * sp.sin(theta)),
        closed=True,
        kind="circle",
        domain=((0.0, 2.0 * math.pi, True),),
        params={"radius": radius},
    )


def interval_model(lower: float = 0.0, upper: float = 1.0) -> MetricModel:
    """Flat [lower, upper] with two boundary points"""
    if not upper > lower:
        raise MalformedScenarioError(f"interval needs upper > lower, got [{lower}, {upper}]")
    symbols = coordinate_symbols(["x"])
    boundary = BoundaryModel((
        BoundaryComponent("lower", 0, lambda s: np.array([lower]), lambda x: np.array([-1.0])),
        BoundaryComponent("upper", 0, lambda s: np.array([upper]), lambda x: np.array([1.0])),
    ))
    return _from_matrix(
        "interval",
        symbols,
        sp.Matrix([[1]]),
        chart_contains=lambda x: lower - EDGE_TOL <= x[0] <= upper + EDGE_TOL,
        boundary=boundary,
        kind="interval",
        domain=((lower, upper, False),),
        params={"lower": lower, "upper": upper},
    )


def slab_model(dim: int = 2) -> MetricModel:
    """Flat [0,1] × T^{n-1}, torus factors of period 2π"""
    if dim < 2:
        raise MalformedScenarioError("slab needs dim >= 2")
    symbols = coordinate_symbols(["x"] + [f"t{i + 1}" for i in range(dim - 1)])
    bounds = tuple((0.0, 2.0 * math.pi, True) for _ in range(dim - 1))

    def face(height, sign):
        def param(s):
            return np.concatenate(([height], np.asarray(s, dtype=float)))

        def normal(x):
            nu = np.zeros(dim)
            nu[0] = sign
            return nu

        def tangents(s):
            E = np.zeros((dim, dim - 1))
            E[1:, :] = np.eye(dim - 1)
            return E

        return param, normal, tangents

    param, normal, tangents = face(0.0, -1.0)
    bottom = BoundaryComponent("bottom", dim - 1, param, normal, bounds, tangents)
    param, normal, tangents = face(1.0, 1.0)
    top = BoundaryComponent("top", dim - 1, param, normal, bounds, tangents)
    return _from_matrix(
        "slab",
        symbols,
        sp.eye(dim),
        chart_contains=lambda x: -EDGE_TOL <= x[0] <= 1.0 + EDGE_TOL,
        boundary=BoundaryModel((bottom, top)),
        kind="slab",
        domain=((0.0, 1.0, False),) + bounds,
        params={"dim": dim},
    )


def diag_family_model(expressions: Sequence[str], coordinates: Optional[Sequence[str]] = None,
                      lower: float = 0.5, upper: float = 1.5) -> MetricModel:
    """Diagonal metric diag(e_1, ..., e_n) with user expressions in the chart coordinates"""
    expressions = [e for e in expressions if str(e).strip()]
    if not expressions:
        raise MalformedScenarioError("diag-family needs at least one diagonal expression")
    dim = len(expressions)
    names = list(coordinates) if coordinates else [f"x{i + 1}" for i in range(dim)]
    if len(names) != dim:
        raise MalformedScenarioError(f"diag-family has {dim} expressions but {len(names)} coordinates")
    symbols = coordinate_symbols(names)
    diag = [parse_expression(str(e), symbols) for e in expressions]
    model = _from_matrix(
        "diag-family",
        symbols,
        sp.diag(*diag),
        kind="custom",
        domain=tuple((lower, upper, False) for _ in range(dim)),
        params={"expressions": list(expressions), "coordinates": names},
    )
    entries = model.metric_at

    def positive(x):
        return bool(np.all(np.diag(np.asarray(entries(x), dtype=float).reshape(dim, dim)) > 0.0))

    return replace(model, chart_contains=positive)


def build_model(name: str, dim: int = 2, truncation: float = 6.0, cap_angle: float = math.pi / 2,
                lower: float = 0.0, upper: float = 1.0, expressions: Optional[Sequence[str]] = None,
                coordinates: Optional[Sequence[str]] = None, pole: str = "north", radius: float = 1.0,
                fd_policy: StepPolicy = DEFAULT_POLICY) -> MetricModel:
    """Registry lookup for the built-in models"""
    if name not in MODEL_NAMES:
        raise UnknownIdentifierError("model", name, MODEL_NAMES)
    if dim < 1:
        raise MalformedScenarioError(f"Model dimension must be positive, got {dim}")
    if name in ("sphere-spherical", "sphere-stereo", "hemisphere") and dim < 2:
        raise MalformedScenarioError(f"Model '{name}' needs dim >= 2")

    if name == "euclidean":
        model = euclidean_model(dim)
    elif name == "gaussian-chart":
        model = gaussian_chart_model(dim, truncation)
    elif name == "sphere-spherical":
        model = sphere_spherical_model(dim, radius)
    elif name == "sphere-stereo":
        model = sphere_stereo_model(dim, pole)
    elif name == "hemisphere":
        model = hemisphere_model(dim, cap_angle)
    elif name == "circle":
        model = circle_model(radius)
    elif name == "interval":
        model = interval_model(lower, upper)
    elif name == "slab":
        model = slab_model(dim)
    else:
        model = diag_family_model(expressions or [], coordinates, lower, upper)
    logger.debug(f"Built model '{name}' of dimension {model.dim}")
    return model.with_fd_policy(fd_policy)
