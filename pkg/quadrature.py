"""
Quadrature rules and sample grids on model charts

Volume grids are tensor products of one-dimensional rules chosen per axis:
Gauss-Legendre on bounded axes, the trapezoid rule on periodic axes, and on
polar angles of spheres Gauss-Legendre in cos(a) whenever the volume factor
carries an odd power of sin(a). Weights are coordinate weights; the metric
volume factor is applied by the integrators.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erfc

from exceptions import MalformedScenarioError, UnknownIdentifierError

logger = logging.getLogger(__name__)

GRID_RULES = ["auto", "gauss-legendre", "trapezoid"]

# Half-width of identity sample boxes on Gaussian charts
GAUSSIAN_SAMPLE_HALF_WIDTH = 3.0


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Chart points with positive coordinate weights"""
    points: np.ndarray
    weights: np.ndarray
    rule: str = "auto"
    # Bound on the mass e^{-|x|²/2} lost outside a truncated chart
    tail_bound: float = 0.0
    nodes: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("Grid points and weights differ in length")
        if np.any(self.weights <= 0.0):
            raise ValueError("Quadrature weights must be positive")

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.points)

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])


@dataclass(frozen=True, eq=False)
class BoundaryComponentGrid:
    """Parameter grid over one boundary component"""
    name: str
    params: np.ndarray
    points: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    components: Tuple[BoundaryComponentGrid, ...] = field(default_factory=tuple)

    @property
    def names(self) -> List[str]:
        return [c.name for c in self.components]

    def __len__(self) -> int:
        return sum(len(c) for c in self.components)

    def __iter__(self):
        return iter(self.components)


def gauss_legendre(lower: float, upper: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Legendre nodes and weights on [lower, upper]"""
    t, w = np.polynomial.legendre.leggauss(m)
    half = 0.5 * (upper - lower)
    return lower + half * (t + 1.0), half * w


def trapezoid_periodic(lower: float, upper: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Equispaced nodes on a period; spectrally accurate for smooth periodic integrands"""
    h = (upper - lower) / m
    return lower + h * np.arange(m), np.full(m, h)


def polar_rule(lower: float, upper: float, m: int, sine_power: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule for a polar angle a whose volume factor carries sin(a)^sine_power

    Odd powers: Gauss-Legendre in t = cos(a), returned as angle nodes with
    weights w_t / sin(a), so that weight · sin(a)^p is the t-rule applied to a
    polynomial-like integrand. Even powers: Gauss-Legendre in the angle.
    """
    if sine_power % 2 == 1:
        t, w = gauss_legendre(math.cos(upper), math.cos(lower), m)
        angles = np.arccos(t)
        return angles[::-1], (w / np.sin(angles))[::-1]
    return gauss_legendre(lower, upper, m)


def _tensor(rules: Sequence[Tuple[np.ndarray, np.ndarray]]) -> Tuple[np.ndarray, np.ndarray]:
    nodes = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    weights = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    points = np.stack([a.ravel() for a in nodes], axis=1)
    w = np.ones(points.shape[0])
    for a in weights:
        w = w * a.ravel()
    return points, w


def gaussian_tail_bound(dim: int, half_width: float) -> float:
    """Upper bound on ∫ e^{-|x|²/2} over ℝⁿ minus the cube [-L, L]ⁿ"""
    one_axis = math.sqrt(2.0 * math.pi) * float(erfc(half_width / math.sqrt(2.0)))
    return dim * (2.0 * math.pi) ** ((dim - 1) / 2.0) * one_axis


def _axis_rules(model, m: int, rule: str, pole_band: float = 0.0, sample: bool = False):
    kind = model.kind
    n = model.dim
    rules = []
    for axis, (lower, upper, periodic) in enumerate(model.domain):
        if sample and kind == "gaussian":
            lower, upper = max(lower, -GAUSSIAN_SAMPLE_HALF_WIDTH), min(upper, GAUSSIAN_SAMPLE_HALF_WIDTH)
        if periodic and rule in ("auto", "trapezoid"):
            rules.append(trapezoid_periodic(lower, upper, m))
            continue
        polar = kind in ("sphere", "cap") and axis < n - 1
        if polar and pole_band > 0.0:
            lower = max(lower, pole_band)
            if kind == "sphere" or axis > 0:
                upper = min(upper, math.pi - pole_band)
        if polar and rule == "auto" and not sample:
            rules.append(polar_rule(lower, upper, m, n - 1 - axis))
        else:
            rules.append(gauss_legendre(lower, upper, m))
    return rules


def volume_grid(model, nodes: int = 16, rule: str = "auto") -> QuadratureGrid:
    """
    Quadrature grid covering the model's chart box

    For spheres and caps this covers the whole manifold up to measure zero.
    Truncated Gaussian charts report the tail bound of the standard Gaussian.
    """
    if rule not in GRID_RULES:
        raise UnknownIdentifierError("grid rule", rule, GRID_RULES)
    if nodes < 1:
        raise MalformedScenarioError(f"Grid needs at least one node per axis, got {nodes}")
    points, weights = _tensor(_axis_rules(model, nodes, rule))
    tail = 0.0
    if model.kind == "gaussian":
        tail = gaussian_tail_bound(model.dim, float(model.params.get("truncation", 6.0)))
    logger.debug(f"Volume grid for '{model.name}': {points.shape[0]} points, rule {rule}")
    return QuadratureGrid(points=points, weights=weights, rule=rule, tail_bound=tail, nodes=(nodes,) * model.dim)


def sample_grid(model, nodes: int = 6, pole_band: float = 0.05) -> QuadratureGrid:
    """
    Interior sample points for pointwise identity checks

    Sphere polar angles stay pole_band away from the coordinate poles;
    Gaussian charts are sampled on a box where e^{-f} stays representable.
    """
    points, weights = _tensor(_axis_rules(model, nodes, "gauss-legendre", pole_band, sample=True))
    keep = np.array([model.contains(p) for p in points], dtype=bool)
    return QuadratureGrid(points=points[keep], weights=weights[keep], rule="sample", nodes=(nodes,) * model.dim)


def _parameter_rules(component, m: int):
    rules = []
    p = component.param_dim
    for axis, (lower, upper, periodic) in enumerate(component.param_bounds):
        if periodic:
            rules.append(trapezoid_periodic(lower, upper, m))
        elif abs(lower) < 1e-14 and abs(upper - math.pi) < 1e-14:
            rules.append(polar_rule(lower, upper, m, p - 1 - axis))
        else:
            rules.append(gauss_legendre(lower, upper, m))
    return rules


def boundary_grid(model, nodes: int = 32) -> BoundaryGrid:
    """Per-component parameter grids; zero-dimensional components are single points of weight 1"""
    if model.boundary is None:
        return BoundaryGrid(())
    components = []
    for comp in model.boundary.components:
        if comp.param_dim == 0:
            params = np.zeros((1, 0))
            weights = np.ones(1)
        else:
            params, weights = _tensor(_parameter_rules(comp, nodes))
        points = np.stack([comp.point(s) for s in params])
        components.append(BoundaryComponentGrid(comp.name, params, points, weights))
    return BoundaryGrid(tuple(components))


def grid_from_spec(model, spec: Optional[dict] = None, defaults=None) -> Tuple[QuadratureGrid, BoundaryGrid]:
    """Volume and boundary grids from a scenario grid section"""
    spec = spec or {}
    nodes = int(spec.get("nodes", getattr(defaults, "NODES", 16)))
    boundary_nodes = int(spec.get("boundary_nodes", getattr(defaults, "BOUNDARY_NODES", 32)))
    rule = spec.get("rule", "auto")
    return volume_grid(model, nodes, rule), boundary_grid(model, boundary_nodes)
