"""Numerical primitives shared by the solvers: root finding on monotone
scalar functions and an ellipsoid method for maximizing concave
nondifferentiable dual functions over the nonnegative orthant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np


class NoRootError(ValueError):
    """Target lies outside the function's range on [0, inf)."""


class NonMonotoneError(ValueError):
    """Bracketing detected values inconsistent with a nonincreasing function."""


class IterationLimitError(RuntimeError):
    """Iteration budget exhausted; best iterate attached."""

    def __init__(self, message: str, best_mu: np.ndarray, best_value: float, iterations: int):
        super().__init__(message)
        self.best_mu = best_mu
        self.best_value = best_value
        self.iterations = iterations


@dataclass(frozen=True)
class BisectionSettings:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iters: int = 200
    bracket_growth: float = 2.0

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


_BRACKET_CAP = 1e30  # beyond this the target is treated as below inf f


def bisect_decreasing(
    f: Callable[[float], float],
    target: float,
    settings: Optional[BisectionSettings] = None,
) -> float:
    """Solve f(x) = target for a continuous nonincreasing f on [0, inf).

    The bracket is found by doubling from [0, 1]. Raises NoRootError when the
    target is above f(0) or below the infimum of f, NonMonotoneError when the
    sampled values increase along the way.
    """
    s = settings or BisectionSettings()
    tol = s.abs_tol * max(1.0, abs(target))

    f0 = f(0.0)
    if target > f0 + tol:
        raise NoRootError(f"target {target} exceeds f(0) = {f0}")
    if abs(f0 - target) <= tol:
        return 0.0

    lo, f_lo = 0.0, f0
    hi = 1.0
    f_hi = f(hi)
    slack = 1e-9 * max(1.0, abs(f_lo))
    for _ in range(s.max_iters):
        if f_hi > f_lo + slack:
            raise NonMonotoneError(f"f({hi}) > f({lo}) while expanding the bracket")
        if f_hi <= target:
            break
        lo, f_lo = hi, f_hi
        hi *= s.bracket_growth
        if hi > _BRACKET_CAP:
            raise NoRootError(f"target {target} appears below inf f (f({lo}) = {f_lo})")
        f_hi = f(hi)
    else:
        raise NoRootError(f"no bracket found within {s.max_iters} expansions")

    for _ in range(s.max_iters):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid - target) <= tol:
            return mid
        if f_mid > f_lo + slack or f_mid < f_hi - slack:
            raise NonMonotoneError("midpoint value outside the bracket's range")
        if f_mid > target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        if hi - lo <= s.abs_tol + s.rel_tol * abs(mid):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def bisect_decreasing_batch(
    f: Callable[[np.ndarray], np.ndarray],
    target: np.ndarray,
    hi: Optional[np.ndarray] = None,
    iters: int = 100,
    expand_iters: int = 120,
) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise bisection for a vector of independent nonincreasing problems.

    f maps an (n,) array to an (n,) array, elementwise nonincreasing. When hi
    is omitted, upper brackets are grown by doubling from 1; the caller must
    guarantee roots exist. Returns the final (lo, hi) bracket pair with
    f(lo) >= target >= f(hi) elementwise; callers choose the endpoint that
    suits their feasibility direction.
    """
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    if hi is None:
        hi = np.ones_like(target)
        for _ in range(expand_iters):
            vals = f(hi)
            need = vals > target
            if not np.any(need):
                break
            lo = np.where(need, hi, lo)
            hi = np.where(need, hi * 2.0, hi)
        else:
            raise NoRootError("batch bracket expansion failed")
    else:
        hi = np.asarray(hi, dtype=float).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = f(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return lo, hi


# ---------------------------------------------------------------------------
# Ellipsoid method
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EllipsoidSettings:
    initial_radius: float = 10.0
    center_init: Optional[np.ndarray] = None  # defaults to the all-ones vector
    stop_norm: float = 1e-9
    max_iters: Optional[int] = None           # defaults to 200 * dim^2

    def __post_init__(self):
        if self.initial_radius <= 0:
            raise ValueError("initial_radius must be positive")


class EllipsoidResult(NamedTuple):
    mu: np.ndarray
    value: float
    iterations: int


def ellipsoid_maximize(
    g: Callable[[np.ndarray], tuple[float, np.ndarray]],
    dim: int,
    settings: Optional[EllipsoidSettings] = None,
) -> EllipsoidResult:
    """Maximize a concave function over the nonnegative orthant.

    g returns (value, subgradient) at a feasible point. Ascent cuts use the
    subgradient; whenever a coordinate of the center goes negative, a
    feasibility cut with the constraint normal is applied instead and g is
    not evaluated there. Stops once the linearization certificate
    sqrt(s^T P s) drops below stop_norm, so the best value found is within
    stop_norm of the optimum. Raises IterationLimitError (best iterate
    attached) when the budget runs out first.
    """
    s = settings or EllipsoidSettings()
    max_iters = s.max_iters if s.max_iters is not None else 200 * dim * dim
    x = np.ones(dim) if s.center_init is None else np.asarray(s.center_init, dtype=float).copy()

    if dim == 1:
        return _maximize_interval(g, float(x[0]), s.initial_radius, s.stop_norm, max_iters)

    n = dim
    P = np.eye(n) * s.initial_radius**2
    best_val = -np.inf
    best_x = x.copy()
    for it in range(1, max_iters + 1):
        if np.any(x < 0.0):
            i = int(np.argmin(x))
            cut = np.zeros(n)
            cut[i] = -1.0  # keep {z : z_i >= center_i}
        else:
            val, sub = g(x)
            if val > best_val:
                best_val, best_x = val, x.copy()
            cert = float(np.sqrt(max(sub @ P @ sub, 0.0)))
            if cert <= s.stop_norm:
                return EllipsoidResult(np.maximum(best_x, 0.0), best_val, it)
            cut = -np.asarray(sub, dtype=float)
        Pg = P @ cut
        gamma = float(np.sqrt(max(cut @ Pg, 0.0)))
        if gamma <= 0.0:
            # ellipsoid collapsed along the cut direction; nothing left to explore
            return EllipsoidResult(np.maximum(best_x, 0.0), best_val, it)
        gn = Pg / gamma
        x = x - gn / (n + 1.0)
        P = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1.0)) * np.outer(gn, gn))
        P = 0.5 * (P + P.T)
    raise IterationLimitError(
        f"ellipsoid method did not certify within {max_iters} iterations",
        np.maximum(best_x, 0.0),
        best_val,
        max_iters,
    )


def _maximize_interval(g, center: float, radius: float, stop_norm: float, max_iters: int):
    """One-dimensional specialization: concave maximization by subgradient
    bisection on [max(0, c - r), c + r]."""
    lo = max(0.0, center - radius)
    hi = center + radius
    best_val = -np.inf
    best_x = lo
    for it in range(1, max_iters + 1):
        x = 0.5 * (lo + hi)
        val, sub = g(np.array([x]))
        slope = float(np.asarray(sub).reshape(-1)[0])
        if val > best_val:
            best_val, best_x = val, x
        if abs(slope) * (hi - lo) <= stop_norm or hi - lo <= 1e-15 * max(1.0, x):
            return EllipsoidResult(np.array([best_x]), best_val, it)
        if slope > 0:
            lo = x
        else:
            hi = x
    raise IterationLimitError(
        f"interval method did not certify within {max_iters} iterations",
        np.array([best_x]),
        best_val,
        max_iters,
    )
