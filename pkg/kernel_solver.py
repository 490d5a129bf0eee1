"""
Discrete drift Laplacian and adjoint operator on finite bases

Spectra of Δ_f come from the generalized problem -A c = σ G c with A the
Galerkin matrix ⟨φ_k, Δ_f φ_l⟩_f and G the weighted Gram matrix. Kernel
elements of (δℛ_f)* come from the smallest singular values of the
collocation matrix whitened by the Cholesky factor of G, so singular values
measure ‖(δℛ_f)* u‖_f / ‖u‖_f and candidates come out L²_f-orthonormal.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from discrete_bases import DiscreteBasis, build_basis
from exceptions import EigenSolverError, IllConditionedBasisError, MalformedScenarioError, UnknownIdentifierError
from settings import PROBE_HYPOTHESES
from tensor_calculus import local_geometry, tensor_norm
from weighted_calculus import WeightedSpace, bakry_emery_ricci, perelman_scalar, traceless

logger = logging.getLogger(__name__)

# Largest acceptable condition number of the weighted Gram matrix
GRAM_CONDITION_LIMIT = 1e12
# Per-point acceptance scale of the whitened singular values
SPECTRAL_TOLERANCE = 1e-6
# Points of the dense finite-difference oracle
DENSE_FD_POINTS = 2048


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    """Tabulated basis, collocation matrix of Δ_f and the weighted Galerkin pair"""
    basis: DiscreteBasis
    grid: object
    measure: np.ndarray
    values: np.ndarray
    collocation: np.ndarray
    gram: np.ndarray
    galerkin: np.ndarray
    gram_condition: float
    symmetry_residual: float


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenfields: np.ndarray
    weighted_orthonormality_residual: float
    symmetry_residual: float = 0.0
    gram_condition: float = 1.0
    basis_kind: str = ""
    basis_size: int = 0

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(s) for s in self.eigenvalues],
            "weighted_orthonormality_residual": self.weighted_orthonormality_residual,
            "symmetry_residual": self.symmetry_residual,
            "gram_condition": self.gram_condition,
            "basis": self.basis_kind,
            "basis_size": self.basis_size,
        }


@dataclass
class KernelCandidate:
    coefficients: np.ndarray
    singular_value: float
    sup_residual: float
    tolerance: float

    @property
    def accepted(self) -> bool:
        return bool(self.sup_residual < self.tolerance)

    def to_dict(self) -> dict:
        return {"singular_value": self.singular_value, "sup_residual": self.sup_residual, "accepted": self.accepted}


@dataclass
class KernelSearchResult:
    candidates: List[KernelCandidate]
    singular_values: np.ndarray
    gram: np.ndarray
    gram_condition: float
    tolerance: float
    grid_size: int
    basis_kind: str = ""
    basis_size: int = 0

    @property
    def min_singular_value(self) -> float:
        return float(self.singular_values[0]) if self.singular_values.size else float("nan")

    @property
    def kernel_dim(self) -> int:
        return sum(1 for c in self.candidates if c.accepted)

    @property
    def kernel_coefficients(self) -> np.ndarray:
        accepted = [c.coefficients for c in self.candidates if c.accepted]
        if not accepted:
            return np.zeros((self.gram.shape[0], 0))
        return np.stack(accepted, axis=1)

    def to_dict(self) -> dict:
        return {
            "kernel_dim": self.kernel_dim,
            "min_singular_value": self.min_singular_value,
            "smallest_singular_values": [float(s) for s in self.singular_values[:5]],
            "tolerance": self.tolerance,
            "gram_condition": self.gram_condition,
            "candidates": [c.to_dict() for c in self.candidates],
            "basis": self.basis_kind,
            "basis_size": self.basis_size,
        }


def _measure(ws: WeightedSpace, grid) -> np.ndarray:
    return np.array([w * ws.measure_factor(x) for x, w in zip(grid.points, grid.weights)])


def weighted_gram(values: np.ndarray, measure: np.ndarray) -> np.ndarray:
    G = values.T @ (measure[:, None] * values)
    return 0.5 * (G + G.T)


def _check_gram(G: np.ndarray, limit: float) -> float:
    condition = float(np.linalg.cond(G))
    if not math.isfinite(condition) or condition > limit:
        raise IllConditionedBasisError(f"Weighted Gram matrix has condition number {condition:.3e} > {limit:.1e}")
    return condition


def _drift_rows(ws: WeightedSpace, x, D1: np.ndarray, D2: np.ndarray):
    """Hessians and Δ_f of every basis function at one point"""
    geo = local_geometry(ws.model, x)
    hess = D2 - np.einsum('kij,nk->nij', geo.christoffel, D1)
    df = ws.density.partials(x, ws.policy)
    lap_f = np.einsum('ij,nij->n', geo.ginv, hess) - D1 @ (geo.ginv @ df)
    return geo, hess, lap_f


def assemble_drift_laplacian(ws: WeightedSpace, basis: DiscreteBasis, grid=None,
                             gram_limit: float = GRAM_CONDITION_LIMIT) -> AssembledSystem:
    """
    Collocation matrix L[p, k] = Δ_f φ_k(x_p) and the Galerkin pair (A, G)

    The symmetry residual is ‖G⁻¹(A - Aᵀ)‖ relative to ‖G⁻¹A‖, i.e. how far
    G⁻¹A is from self-adjoint in the L²_f inner product.
    """
    grid = grid if grid is not None else basis.collocation_grid(ws.model)
    V, D1, D2 = basis.tabulate(grid.points)
    L = np.empty_like(V)
    for p, x in enumerate(grid.points):
        L[p] = _drift_rows(ws, x, D1[p], D2[p])[2]
    mu = _measure(ws, grid)
    G = weighted_gram(V, mu)
    condition = _check_gram(G, gram_limit)
    A = V.T @ (mu[:, None] * L)
    operator = np.linalg.solve(G, A)
    asymmetry = np.linalg.solve(G, A - A.T)
    symmetry = float(np.max(np.abs(asymmetry)) / max(1.0, float(np.max(np.abs(operator)))))
    logger.debug(f"Assembled Δ_f on {basis.kind}({basis.size}): {len(grid)} points, cond {condition:.2e}")
    return AssembledSystem(basis, grid, mu, V, L, G, A, condition, symmetry)


def solve_drift_eigen(ws: WeightedSpace, basis: DiscreteBasis, grid=None, count: int = 5,
                      gram_limit: float = GRAM_CONDITION_LIMIT) -> SpectralResult:
    """The count smallest-magnitude σ with Δ_f u = -σ u, eigenfields L²_f-orthonormal"""
    system = assemble_drift_laplacian(ws, basis, grid, gram_limit)
    stiffness = -0.5 * (system.galerkin + system.galerkin.T)
    try:
        sigma, vectors = scipy.linalg.eigh(stiffness, system.gram)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"Generalized eigensolver failed on {basis.kind}({basis.size}): {e}") from e
    pick = np.argsort(np.abs(sigma), kind="stable")[:count]
    pick = pick[np.argsort(sigma[pick], kind="stable")]
    sigma, vectors = sigma[pick], vectors[:, pick]
    orthonormality = float(np.max(np.abs(vectors.T @ system.gram @ vectors - np.eye(len(pick))))) if len(pick) else 0.0
    return SpectralResult(sigma, vectors, orthonormality, system.symmetry_residual, system.gram_condition,
                          basis.kind, len(basis))


@dataclass(frozen=True, eq=False)
class AdjointSystem:
    """
    (δℛ_f)* on the basis: one block of n² rows per collocation point

    Blocks hold Mᵀ T M with g⁻¹ = M Mᵀ, so their Frobenius norm is |T|_g.
    matrix is the stack of blocks scaled by √(weight · √det g · e^{-f}).
    """
    basis: DiscreteBasis
    grid: object
    values: np.ndarray
    blocks: np.ndarray
    matrix: np.ndarray
    gram: np.ndarray
    gram_condition: float


def assemble_adjoint_matrix(ws: WeightedSpace, basis: DiscreteBasis, grid=None,
                            gram_limit: float = GRAM_CONDITION_LIMIT) -> AdjointSystem:
    """Coefficients → stacked samples of -(Δ_f u) g + ∇²u - u Ric_f"""
    grid = grid if grid is not None else basis.collocation_grid(ws.model)
    V, D1, D2 = basis.tabulate(grid.points)
    n = ws.dim
    N = V.shape[1]
    blocks = np.empty((len(grid), n * n, N))
    for p, x in enumerate(grid.points):
        geo, hess, lap_f = _drift_rows(ws, x, D1[p], D2[p])
        T = -lap_f[:, None, None] * geo.g + hess - V[p][:, None, None] * bakry_emery_ricci(ws, x)
        M = np.linalg.cholesky(geo.ginv)
        S = np.einsum('ia,nij,jb->nab', M, T, M)
        blocks[p] = S.reshape(N, n * n).T
    mu = _measure(ws, grid)
    G = weighted_gram(V, mu)
    condition = _check_gram(G, gram_limit)
    matrix = (np.sqrt(mu)[:, None, None] * blocks).reshape(len(grid) * n * n, N)
    return AdjointSystem(basis, grid, V, blocks, matrix, G, condition)


def _whiten(system: AdjointSystem):
    try:
        R = scipy.linalg.cholesky(system.gram)
    except np.linalg.LinAlgError as e:
        raise IllConditionedBasisError(f"Weighted Gram matrix of {system.basis.kind} is not positive-definite") from e
    whitened = scipy.linalg.solve_triangular(R, system.matrix.T, trans='T').T
    try:
        _, s, vt = scipy.linalg.svd(whitened, full_matrices=False)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"SVD of the adjoint matrix failed: {e}") from e
    return R, s[::-1], vt[::-1]


def kernel_search(ws: WeightedSpace, basis: DiscreteBasis, grid=None, tol: Optional[float] = None,
                  kernel_tolerance: float = 1e-6, gram_limit: float = GRAM_CONDITION_LIMIT) -> KernelSearchResult:
    """
    Right singular vectors of the whitened adjoint matrix below tol

    tol defaults to 1e-6·√(grid size). A candidate is accepted when its
    pointwise sup of |(δℛ_f)* u|_g over the collocation grid is below
    kernel_tolerance·(1 + sup|u|).
    """
    system = assemble_adjoint_matrix(ws, basis, grid, gram_limit)
    size = len(system.grid)
    tol = SPECTRAL_TOLERANCE * math.sqrt(size) if tol is None else tol
    R, singular, rows = _whiten(system)
    candidates = []
    for s, v in zip(singular, rows):
        if s >= tol:
            break
        c = scipy.linalg.solve_triangular(R, v)
        sup = float(np.max(np.linalg.norm(system.blocks @ c, axis=1)))
        scale = 1.0 + float(np.max(np.abs(system.values @ c)))
        candidates.append(KernelCandidate(c, float(s), sup, kernel_tolerance * scale))
    result = KernelSearchResult(candidates, singular, system.gram, system.gram_condition, tol, size,
                                basis.kind, len(basis))
    logger.info(f"Kernel search on {basis.kind}({basis.size}): dim {result.kernel_dim}, "
                f"min singular value {result.min_singular_value:.3e}")
    return result


def principal_angles(gram: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Principal angles between two coefficient subspaces in the L²_f inner product"""
    R = scipy.linalg.cholesky(gram)
    return scipy.linalg.subspace_angles(R @ np.atleast_2d(first.T).T, R @ np.atleast_2d(second.T).T)


def coordinate_subspace(basis: DiscreteBasis, labels: Sequence[str]) -> np.ndarray:
    """Coefficient vectors of the named basis functions"""
    E = np.zeros((len(basis), len(labels)))
    for j, label in enumerate(labels):
        E[basis.index_of(label), j] = 1.0
    return E


def dense_fd_spectrum(ws: WeightedSpace, count: int = 5, points: int = DENSE_FD_POINTS,
                      richardson: bool = True) -> np.ndarray:
    """
    Lowest σ of -Δ_f on a 1-D model by conservative finite differences

    -Δ_f u = -(1/ρ)(a u')' with ρ = √g e^{-f} and a = ρ/g, symmetrized by
    √ρ. Dirichlet on intervals (tridiagonal solver), periodic on circles.
    One Richardson level combines N and N/2.
    """
    model = ws.model
    if model.dim != 1 or model.kind not in ("interval", "circle"):
        raise MalformedScenarioError(f"Dense FD oracle needs the interval or the circle, got '{model.name}'")
    lower, upper, periodic = model.domain[0]

    def flux(x):
        return ws.measure_factor(np.array([x])) * local_geometry(model, np.array([x])).ginv[0, 0]

    def level(N):
        h = (upper - lower) / N
        if periodic:
            nodes = lower + h * np.arange(N)
        else:
            nodes = lower + h * np.arange(1, N)
        rho = np.array([ws.measure_factor(np.array([x])) for x in nodes])
        a_plus = np.array([flux(x + 0.5 * h) for x in nodes])
        a_minus = np.array([flux(x - 0.5 * h) for x in nodes])
        diag = (a_plus + a_minus) / (h * h * rho)
        off = -a_plus[:-1] / (h * h * np.sqrt(rho[:-1] * rho[1:]))
        if not periodic:
            return scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select='i',
                                                 select_range=(0, count - 1))
        M = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        corner = -a_plus[-1] / (h * h * math.sqrt(rho[-1] * rho[0]))
        M[0, -1] = M[-1, 0] = corner
        return scipy.linalg.eigh(M, eigvals_only=True, subset_by_index=[0, count - 1])

    fine = level(points)
    if not richardson:
        return fine
    return (4.0 * fine - level(points // 2)) / 3.0


@dataclass
class ProbeLevel:
    size: int
    basis_size: int
    min_singular_value: float
    kernel_dim: int
    gram_condition: float

    def to_dict(self) -> dict:
        return {"size": self.size, "basis_size": self.basis_size, "min_singular_value": self.min_singular_value,
                "kernel_dim": self.kernel_dim, "gram_condition": self.gram_condition}


@dataclass
class ProbeReport:
    """Minimum-singular-value evidence across a resolution ladder"""
    hypothesis: str
    levels: List[ProbeLevel]
    floor: float
    hypothesis_residuals: Dict[str, float] = field(default_factory=dict)
    hypothesis_ok: bool = True
    witness_residual: Optional[float] = None
    message: str = ""

    @property
    def min_singular_values(self) -> List[float]:
        return [level.min_singular_value for level in self.levels]

    @property
    def monotonicity(self) -> str:
        values = self.min_singular_values
        steps = np.diff(values)
        if steps.size == 0 or np.all(steps <= 0.0):
            return "nonincreasing"
        if np.all(steps >= 0.0):
            return "nondecreasing"
        return "mixed"

    @property
    def kernel_found(self) -> bool:
        return bool(self.levels) and self.levels[-1].kernel_dim > 0

    @property
    def passed(self) -> bool:
        if self.hypothesis in ("constant-perelman", "isotropic-ricci-f"):
            return bool(self.levels) and all(s >= self.floor for s in self.min_singular_values)
        return self.kernel_found

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis,
            "floor": self.floor,
            "levels": [level.to_dict() for level in self.levels],
            "min_singular_value": min(self.min_singular_values) if self.levels else None,
            "monotonicity": self.monotonicity,
            "hypothesis_residuals": dict(sorted(self.hypothesis_residuals.items())),
            "hypothesis_ok": self.hypothesis_ok,
            "kernel_found": self.kernel_found,
            "witness_residual": self.witness_residual,
            "pass": self.passed,
            "message": self.message,
        }


def hypothesis_residuals(ws: WeightedSpace, points) -> Dict[str, float]:
    """sup |ℛ_f - mean ℛ_f| and sup |∘Ric_f|_g over the points"""
    points = list(points)
    Rf = np.array([perelman_scalar(ws, x) for x in points])
    traceless_norm = max((tensor_norm(ws.model, traceless(ws, bakry_emery_ricci(ws, x), x), x) for x in points),
                         default=0.0)
    spread = float(np.max(np.abs(Rf - Rf.mean()))) if Rf.size else 0.0
    return {"constant-perelman": spread, "isotropic-ricci-f": float(traceless_norm)}


def nonexistence_probe(ws: WeightedSpace, basis_kind: str, ladder: Sequence[int], hypothesis: str,
                       floor: float, family: Optional[str] = None, hypothesis_tolerance: float = 1e-6,
                       kernel_tolerance: float = 1e-6, gram_limit: float = GRAM_CONDITION_LIMIT) -> ProbeReport:
    """
    Smallest whitened singular value of (δℛ_f)* on a ladder of bases

    For constant-perelman and isotropic-ricci-f the probe passes when every
    level stays at or above floor. The out-of-hypothesis and control cases
    pass when the finest level finds a kernel element.
    """
    if hypothesis not in PROBE_HYPOTHESES:
        raise UnknownIdentifierError("probe hypothesis", hypothesis, PROBE_HYPOTHESES)
    if not ladder:
        raise MalformedScenarioError("Probe ladder is empty")
    levels = []
    last = None
    for size in ladder:
        basis = build_basis(basis_kind, ws.model, int(size), family)
        last = kernel_search(ws, basis, kernel_tolerance=kernel_tolerance, gram_limit=gram_limit)
        levels.append(ProbeLevel(int(size), len(basis), last.min_singular_value, last.kernel_dim, last.gram_condition))
        logger.info(f"Probe level {size}: min singular value {last.min_singular_value:.6e}")
    grid = build_basis(basis_kind, ws.model, int(ladder[-1]), family).collocation_grid(ws.model)
    residuals = hypothesis_residuals(ws, grid.points)
    hypothesis_ok = True
    if hypothesis in residuals:
        hypothesis_ok = residuals[hypothesis] < hypothesis_tolerance
        if not hypothesis_ok:
            logger.warning(f"Probe hypothesis '{hypothesis}' has residual {residuals[hypothesis]:.3e}")
    witness = None
    accepted = [c for c in last.candidates if c.accepted]
    if accepted:
        witness = min(c.sup_residual for c in accepted)
    if hypothesis == "control":
        message = "not a nonexistence scenario"
    elif hypothesis == "out-of-hypothesis":
        message = "out-of-hypothesis witness found" if accepted else "no out-of-hypothesis witness"
    else:
        message = "bounded below" if all(level.min_singular_value >= floor for level in levels) else "below floor"
    return ProbeReport(hypothesis, levels, floor, residuals, hypothesis_ok, witness, message)
