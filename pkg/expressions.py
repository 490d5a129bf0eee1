"""
Expression parsing and compilation

Scalar, tensor and vector fields given as sympy expressions in chart
coordinates are compiled to numpy callables together with their analytic
partials, so every downstream operator can avoid finite differences.
"""
import logging
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import sympy as sp

from exceptions import MalformedScenarioError
from fields import ScalarField, SymTensorField, VectorField, coords_of

logger = logging.getLogger(__name__)


def coordinate_symbols(names: Sequence[str]) -> tuple:
    """Real sympy symbols for chart coordinates"""
    return tuple(sp.Symbol(name, real=True) for name in names)


def parse_expression(text: str, symbols: Sequence[sp.Symbol], extra: Optional[Dict[str, object]] = None) -> sp.Expr:
    """
    Parse arithmetic text in the chart coordinates

    Raises MalformedScenarioError when the text does not parse or mentions
    names other than the coordinates.
    """
    local = {s.name: s for s in symbols}
    if extra:
        local.update(extra)
    try:
        expr = sp.sympify(text, locals=local)
    except (sp.SympifyError, SyntaxError, TypeError, ValueError) as e:
        raise MalformedScenarioError(f"Cannot parse expression '{text}': {e}") from e
    if not isinstance(expr, sp.Expr):
        raise MalformedScenarioError(f"Expression '{text}' is not a scalar expression")
    unknown = sorted(str(s) for s in expr.free_symbols - set(symbols))
    if unknown:
        valid = ", ".join(s.name for s in symbols)
        raise MalformedScenarioError(
            f"Expression '{text}' uses unknown names {', '.join(unknown)}; coordinates are {valid}"
        )
    return expr


def _compile(symbols, exprs, shape) -> Callable:
    """numpy callable x -> array of `shape` for a flat list of expressions"""
    flat = list(exprs)
    fn = sp.lambdify(symbols, flat, "numpy")

    def call(x):
        x = coords_of(x)
        return np.array(fn(*x), dtype=float).reshape(shape)

    return call


def _gradient_exprs(exprs, symbols):
    """[∂_m e for m, for e] flattened with the derivative axis first"""
    return [sp.diff(e, s) for s in symbols for e in exprs]


def compile_scalar(expr: sp.Expr, symbols: Sequence[sp.Symbol], order: int = 3, label: str = "u") -> ScalarField:
    """ScalarField with analytic partials up to `order` (at most 3)"""
    n = len(symbols)
    expr = sp.sympify(expr)
    value = _compile(symbols, [expr], ())
    derivs = [None, None, None]
    level = [expr]
    for k in range(min(order, 3)):
        level = _gradient_exprs(level, symbols)
        derivs[k] = _compile(symbols, level, (n,) * (k + 1))
    return ScalarField(value=value, d1=derivs[0], d2=derivs[1], d3=derivs[2], label=label)


def compile_tensor(matrix, symbols: Sequence[sp.Symbol], order: int = 2, label: str = "h") -> SymTensorField:
    """SymTensorField from a symmetric sympy matrix of covariant components"""
    n = len(symbols)
    matrix = sp.Matrix(matrix)
    if matrix.shape != (n, n):
        raise MalformedScenarioError(f"Tensor '{label}' must be {n}x{n}, got {matrix.shape}")
    entries = list(matrix)
    value = _compile(symbols, entries, (n, n))
    d1 = d2 = None
    if order >= 1:
        first = _gradient_exprs(entries, symbols)
        d1 = _compile(symbols, first, (n, n, n))
        if order >= 2:
            d2 = _compile(symbols, _gradient_exprs(first, symbols), (n, n, n, n))
    return SymTensorField(value=value, d1=d1, d2=d2, label=label)


def compile_vector(components, symbols: Sequence[sp.Symbol], label: str = "X") -> VectorField:
    """VectorField from contravariant sympy components"""
    n = len(symbols)
    components = list(components)
    if len(components) != n:
        raise MalformedScenarioError(f"Vector '{label}' must have {n} components, got {len(components)}")
    value = _compile(symbols, components, (n,))
    d1 = _compile(symbols, _gradient_exprs(components, symbols), (n, n))
    return VectorField(value=value, d1=d1, label=label)


def compile_metric(matrix, symbols: Sequence[sp.Symbol]):
    """(g, ∂g, ∂∂g) callables for a sympy metric matrix"""
    tensor = compile_tensor(matrix, symbols, order=2, label="g")
    return tensor.value, tensor.d1, tensor.d2


def embedding_inner(embedding: Sequence[sp.Expr], vector: Sequence[float]) -> sp.Expr:
    """⟨X(x), v⟩ for an embedding X and a constant ambient vector v"""
    if len(embedding) != len(vector):
        raise MalformedScenarioError(
            f"Vector has {len(vector)} components but the embedding has {len(embedding)}"
        )
    return sp.Add(*[sp.Float(v) * e for v, e in zip(vector, embedding)])
