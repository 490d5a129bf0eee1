"""
Fields on a chart: scalar, symmetric 2-tensor and vector fields

Each field is a value callable on chart coordinates plus optional analytic
partials. Missing partials fall back to central finite differences under the
caller's StepPolicy. Tensors are stored fully covariant (h_ij), vectors
contravariant (X^k).
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from finite_differences import DEFAULT_POLICY, StepPolicy, partials, second_partials


def coords_of(x) -> np.ndarray:
    """Chart coordinates of an array-like as a float vector"""
    return np.atleast_1d(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class ScalarField:
    value: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    d3: Optional[Callable] = None
    label: str = "u"

    def __call__(self, x) -> float:
        return float(self.value(coords_of(x)))

    def has_analytic(self, order: int) -> bool:
        return [True, self.d1 is not None, self.d2 is not None, self.d3 is not None][order]

    def partials(self, x, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        x = coords_of(x)
        if self.d1 is not None:
            return np.asarray(self.d1(x), dtype=float).reshape(x.size)
        return partials(self.value, x, policy)

    def second_partials(self, x, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        x = coords_of(x)
        if self.d2 is not None:
            return np.asarray(self.d2(x), dtype=float).reshape(x.size, x.size)
        if self.d1 is not None:
            d = partials(lambda y: self.partials(y, policy), x, policy)
            return 0.5 * (d + d.T)
        return second_partials(self.value, x, policy)

    def third_partials(self, x, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        x = coords_of(x)
        if self.d3 is not None:
            return np.asarray(self.d3(x), dtype=float).reshape(x.size, x.size, x.size)
        return partials(lambda y: self.second_partials(y, policy), x, policy)

    def without_derivatives(self, keep: int = 0) -> "ScalarField":
        """Copy that forgets analytic partials above order `keep`"""
        return replace(
            self,
            d1=self.d1 if keep >= 1 else None,
            d2=self.d2 if keep >= 2 else None,
            d3=self.d3 if keep >= 3 else None,
        )


def _combine(callables, coefficients):
    if any(fn is None for fn in callables):
        return None

    def combined(x):
        total = None
        for fn, c in zip(callables, coefficients):
            term = c * np.asarray(fn(x), dtype=float)
            total = term if total is None else total + term
        return total

    return combined


def linear_combination(fields: Sequence[ScalarField], coefficients: Sequence[float], label: str = "u") -> ScalarField:
    """Σ c_k φ_k, keeping every order of partials that all φ_k supply"""
    coefficients = [float(c) for c in coefficients]
    fields = list(fields)
    return ScalarField(
        value=_combine([f.value for f in fields], coefficients),
        d1=_combine([f.d1 for f in fields], coefficients),
        d2=_combine([f.d2 for f in fields], coefficients),
        d3=_combine([f.d3 for f in fields], coefficients),
        label=label,
    )


@dataclass(frozen=True, eq=False)
class SymTensorField:
    """Covariant symmetric 2-tensor; d1[m,i,j] = ∂_m h_ij, d2[l,m,i,j] = ∂_l∂_m h_ij"""
    value: Callable
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    label: str = "h"

    def __call__(self, x) -> np.ndarray:
        x = coords_of(x)
        h = np.asarray(self.value(x), dtype=float).reshape(x.size, x.size)
        return 0.5 * (h + h.T)

    def has_analytic(self, order: int) -> bool:
        return [True, self.d1 is not None, self.d2 is not None][order]

    def partials(self, x, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        x = coords_of(x)
        n = x.size
        if self.d1 is not None:
            return np.asarray(self.d1(x), dtype=float).reshape(n, n, n)
        return partials(self.__call__, x, policy)

    def second_partials(self, x, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        x = coords_of(x)
        n = x.size
        if self.d2 is not None:
            return np.asarray(self.d2(x), dtype=float).reshape(n, n, n, n)
        if self.d1 is not None:
            d = partials(lambda y: self.partials(y, policy), x, policy)
            return 0.5 * (d + d.transpose(1, 0, 2, 3))
        return second_partials(self.__call__, x, policy)

    def without_derivatives(self, keep: int = 0) -> "SymTensorField":
        return replace(self, d1=self.d1 if keep >= 1 else None, d2=self.d2 if keep >= 2 else None)

    def scaled(self, c: float) -> "SymTensorField":
        c = float(c)
        return SymTensorField(
            value=lambda x: c * np.asarray(self.value(x), dtype=float),
            d1=None if self.d1 is None else (lambda x: c * np.asarray(self.d1(x), dtype=float)),
            d2=None if self.d2 is None else (lambda x: c * np.asarray(self.d2(x), dtype=float)),
            label=f"{c}*{self.label}",
        )


@dataclass(frozen=True, eq=False)
class VectorField:
    """Contravariant vector field; d1[m,k] = ∂_m X^k"""
    value: Callable
    d1: Optional[Callable] = None
    label: str = "X"

    def __call__(self, x) -> np.ndarray:
        x = coords_of(x)
        return np.asarray(self.value(x), dtype=float).reshape(x.size)

    def partials(self, x, policy: StepPolicy = DEFAULT_POLICY) -> np.ndarray:
        x = coords_of(x)
        if self.d1 is not None:
            return np.asarray(self.d1(x), dtype=float).reshape(x.size, x.size)
        return partials(self.__call__, x, policy)


def zero_vector(dim: int, label: str = "0") -> VectorField:
    return VectorField(value=lambda x: np.zeros(dim), d1=lambda x: np.zeros((dim, dim)), label=label)
