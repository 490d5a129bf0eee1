"""
Seeded random smooth fields for property checks

All randomness flows from one counter-based generator per scenario seed.
Fields are built as sympy expressions and compiled with analytic partials:
polynomials in the ambient coordinates on spheres, trigonometric polynomials
on periodic axes, and sums of Gaussian bumps on flat charts, which vanish to
round-off at the edge of the chart box.
"""
import logging
from itertools import combinations_with_replacement
from typing import Tuple

import numpy as np
import sympy as sp

from expressions import compile_scalar, compile_tensor, compile_vector
from fields import ScalarField, SymTensorField, VectorField

logger = logging.getLogger(__name__)

# Width of the bumps used on flat charts
BUMP_WIDTH = 0.6
# Bump centres are drawn from this fraction of the chart box
BUMP_CENTRE_FRACTION = 0.3


def field_generator(seed: int) -> np.random.Generator:
    """Counter-based generator; identical seeds give identical fields on any thread"""
    return np.random.Generator(np.random.Philox(int(seed)))


def _coefficient(rng: np.random.Generator, degree: int) -> sp.Float:
    return sp.Float(float(rng.normal()) / (1.0 + degree), 12)


def _polynomial(rng, variables, degree: int) -> sp.Expr:
    terms = [sp.Float(float(rng.normal()), 12)]
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(variables, d):
            terms.append(_coefficient(rng, d) * sp.Mul(*combo))
    return sp.Add(*terms)


def _trig(rng, variable, degree: int) -> sp.Expr:
    terms = [sp.Float(float(rng.normal()), 12)]
    for k in range(1, degree + 1):
        terms.append(_coefficient(rng, k) * sp.cos(k * variable))
        terms.append(_coefficient(rng, k) * sp.sin(k * variable))
    return sp.Add(*terms)


def _bumps(rng, model, count: int = 2) -> sp.Expr:
    symbols = model.symbols
    total = sp.Integer(0)
    for _ in range(count):
        centre = [float(rng.uniform(lo, hi)) * BUMP_CENTRE_FRACTION for lo, hi, _ in model.domain]
        r2 = sp.Add(*[(s - c) ** 2 for s, c in zip(symbols, centre)])
        total += sp.Float(float(rng.normal()), 12) * sp.exp(-r2 / (2 * BUMP_WIDTH ** 2))
    return total


def random_expression(model, rng: np.random.Generator, degree: int = 3) -> Tuple[sp.Expr, bool]:
    """
    Random smooth expression on the model and whether it is effectively compactly supported

    Spheres and caps: polynomial in the embedding. Periodic axes: trigonometric
    polynomials. Flat and Gaussian charts: Gaussian bumps.
    """
    symbols = model.symbols
    kind = model.kind
    if kind in ("sphere", "cap", "stereo") and model.embedding is not None:
        return _polynomial(rng, list(model.embedding), degree), False
    if kind == "circle":
        return _trig(rng, symbols[0], degree), False
    if kind == "slab":
        expr = _polynomial(rng, [symbols[0]], degree)
        for t in symbols[1:]:
            expr = expr * _trig(rng, t, 2)
        return expr, False
    if kind in ("flat", "gaussian"):
        return _bumps(rng, model), True
    return _polynomial(rng, list(symbols), degree), False


def random_scalar(model, rng: np.random.Generator, degree: int = 3, label: str = "u") -> ScalarField:
    expr, _ = random_expression(model, rng, degree)
    return compile_scalar(expr, model.symbols, order=3, label=label)


def random_tensor_expression(model, rng: np.random.Generator, degree: int = 2, terms: int = 2):
    """h = a·g + Σ b_k du_k ⊗ du_k with random smooth a and u_k, as a sympy matrix"""
    symbols = model.symbols
    a, compact = random_expression(model, rng, degree)
    matrix = a * sp.Matrix(model.metric_expr)
    for _ in range(terms):
        u, _ = random_expression(model, rng, degree)
        du = sp.Matrix([sp.diff(u, s) for s in symbols])
        matrix += sp.Float(float(rng.normal()), 12) * (du * du.T)
    return matrix, compact


def random_tensor(model, rng: np.random.Generator, degree: int = 2, scale: float = 1.0,
                  label: str = "h") -> Tuple[SymTensorField, bool]:
    """Random symmetric 2-tensor with analytic first and second partials"""
    matrix, compact = random_tensor_expression(model, rng, degree)
    return compile_tensor(sp.Float(scale) * matrix, model.symbols, order=2, label=label), compact


def gradient_expression(model, expr: sp.Expr):
    """Contravariant components g^{kj} ∂_j expr"""
    ginv = sp.Matrix(model.metric_expr).inv()
    du = sp.Matrix([sp.diff(expr, s) for s in model.symbols])
    return list(ginv * du)


def random_vector(model, rng: np.random.Generator, degree: int = 2, label: str = "X") -> VectorField:
    """X = ∇φ₁ + ψ∇φ₂, generic enough to have both gradient and non-gradient parts"""
    phi1, _ = random_expression(model, rng, degree)
    phi2, _ = random_expression(model, rng, degree)
    psi, _ = random_expression(model, rng, 1)
    components = [a + psi * b for a, b in zip(gradient_expression(model, phi1), gradient_expression(model, phi2))]
    return compile_vector(components, model.symbols, label=label)


def gradient_vector(model, expr: sp.Expr, label: str = "grad u") -> VectorField:
    return compile_vector(gradient_expression(model, expr), model.symbols, label=label)
