"""
Central finite differences with optional Richardson extrapolation
Used wherever an analytic partial is not supplied
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

logger = logging.getLogger(__name__)

# Residuals below this are treated as round-off when measuring convergence order
ROUNDOFF_FLOOR = 1e-12


@dataclass(frozen=True)
class StepPolicy:
    """
    Step sizes for central differences

    Steps are relative: along axis k the actual step is step * max(1, |x_k|).
    First partials use `step`; pure second differences of values use
    `second_step`, large enough to keep cancellation below truncation.
    """
    step: float = 1e-5
    second_step: float = 1e-2
    richardson: bool = True

    def scaled(self, x, k: int, base: Optional[float] = None) -> float:
        base = self.step if base is None else base
        return base * max(1.0, abs(float(x[k])))

    def coarse(self, step: float) -> "StepPolicy":
        """Plain central differences at a single step, for convergence studies"""
        return replace(self, step=step, second_step=step, richardson=False)


DEFAULT_POLICY = StepPolicy()


def _axis(n: int, k: int, h: float) -> np.ndarray:
    e = np.zeros(n)
    e[k] = h
    return e


def _central(fn, x, k, h):
    e = _axis(x.size, k, h)
    return (np.asarray(fn(x + e), dtype=float) - np.asarray(fn(x - e), dtype=float)) / (2.0 * h)


def partials(fn: Callable, x, policy: StepPolicy = DEFAULT_POLICY, step: Optional[float] = None) -> np.ndarray:
    """
    First partials of an array-valued function of chart coordinates

    Returns an array of shape (n, *fn(x).shape) with out[k] = ∂_k fn(x).
    """
    x = np.asarray(x, dtype=float)
    out = []
    for k in range(x.size):
        h = policy.scaled(x, k, step)
        d = _central(fn, x, k, h)
        if policy.richardson:
            d = (4.0 * _central(fn, x, k, 0.5 * h) - d) / 3.0
        out.append(d)
    return np.stack(out)


def _second(fn, x, k, l, hk, hl):
    n = x.size
    if k == l:
        e = _axis(n, k, hk)
        f0 = np.asarray(fn(x), dtype=float)
        return (np.asarray(fn(x + e), dtype=float) - 2.0 * f0 + np.asarray(fn(x - e), dtype=float)) / (hk * hk)
    ek = _axis(n, k, hk)
    el = _axis(n, l, hl)
    pp = np.asarray(fn(x + ek + el), dtype=float)
    pm = np.asarray(fn(x + ek - el), dtype=float)
    mp = np.asarray(fn(x - ek + el), dtype=float)
    mm = np.asarray(fn(x - ek - el), dtype=float)
    return (pp - pm - mp + mm) / (4.0 * hk * hl)


def second_partials(fn: Callable, x, policy: StepPolicy = DEFAULT_POLICY, step: Optional[float] = None) -> np.ndarray:
    """
    Second partials from values only

    Returns shape (n, n, *fn(x).shape), symmetric in the first two axes.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    base = policy.second_step if step is None else step
    sample = np.asarray(fn(x), dtype=float)
    out = np.zeros((n, n) + sample.shape)
    for k in range(n):
        hk = policy.scaled(x, k, base)
        for l in range(k, n):
            hl = policy.scaled(x, l, base)
            d = _second(fn, x, k, l, hk, hl)
            if policy.richardson:
                d = (4.0 * _second(fn, x, k, l, 0.5 * hk, 0.5 * hl) - d) / 3.0
            out[k, l] = d
            out[l, k] = d
    return out


def convergence_order(coarse_residual: float, fine_residual: float, ratio: float = 2.0,
                      floor: float = ROUNDOFF_FLOOR) -> Optional[float]:
    """
    Observed order from residuals at step h and h/ratio

    None when either residual sits at the round-off floor, where the ratio
    carries no information about truncation.
    """
    if coarse_residual is None or fine_residual is None:
        return None
    if coarse_residual <= floor or fine_residual <= floor:
        return None
    return math.log(coarse_residual / fine_residual) / math.log(ratio)
