"""Box-constrained limited-memory quasi-Newton descent.

Projected-path L-BFGS: the two-loop recursion proposes a direction and a
weak-Wolfe line search (Armijo + curvature, with bisection/expansion)
walks the projected path clip(x + a*d). Steps that stop at a bound only
need the Armijo test; interior steps also satisfy the curvature condition,
which keeps the stored (s, y) pairs positive definite. Steepest descent is
the fallback whenever the quasi-Newton direction stops being useful after
projection. Convergence is declared on the infinity norm of the projected
gradient. The trace of accepted objective values is non-increasing by
construction.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class SolveResult:
    x: np.ndarray
    fun: float
    trace: list[float]
    status: str                 # "converged" | "max_iters" | "stalled"
    iterations: int
    projected_gradient_norm: float
    grad: np.ndarray = field(repr=False, default=None)


def _project(x, lower, upper):
    return np.minimum(np.maximum(x, lower), upper)


def _line_search(fun_and_grad, x, f, g, d, lower, upper,
                 armijo: float, curvature: float, max_trials: int):
    """Weak-Wolfe search along the projected path; returns an accepted
    (x_new, f_new, g_new) or None."""
    gd = float(g @ d)
    t, lo, hi = 1.0, 0.0, math.inf
    fallback = None  # best Armijo-satisfying point seen while extending
    for _ in range(max_trials):
        x_new = _project(x + t * d, lower, upper)
        move = x_new - x
        if not np.any(move):
            hi = t
            t = 0.5 * (lo + hi)
            continue
        decrease = float(g @ move)
        if decrease >= 0.0:
            hi = t
            t = 0.5 * (lo + hi)
            continue
        f_new, g_new = fun_and_grad(x_new)
        if f_new > f + armijo * decrease:
            hi = t
            t = 0.5 * (lo + hi)
            continue
        interior = bool(np.array_equal(x_new, x + t * d))
        if interior and float(g_new @ d) < curvature * gd:
            # Armijo holds but the slope is still steep: step farther.
            fallback = (x_new, f_new, g_new)
            lo = t
            t = 2.0 * t if math.isinf(hi) else 0.5 * (lo + hi)
            continue
        return x_new, f_new, g_new
    return fallback


def minimize_box_lbfgs(
    fun_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    max_iters: int = 500,
    tol: float = 1e-6,
    memory: int = 10,
    armijo: float = 1e-4,
    curvature: float = 0.9,
    max_line_search: int = 40,
) -> SolveResult:
    x = _project(np.asarray(x0, dtype=float).copy(), lower, upper)
    f, g = fun_and_grad(x)
    trace = [f]
    pairs: deque[tuple[np.ndarray, np.ndarray]] = deque(maxlen=memory)

    def pg_norm(xv, gv) -> float:
        return float(np.max(np.abs(xv - _project(xv - gv, lower, upper)))) \
            if xv.size else 0.0

    status = "max_iters"
    iterations = 0
    while True:
        if pg_norm(x, g) < tol:
            status = "converged"
            break
        if iterations >= max_iters:
            status = "max_iters"
            break

        d = _lbfgs_direction(g, pairs)
        accepted = None
        directions = (d, -g) if d is not None else (-g,)
        for direction in directions:
            accepted = _line_search(fun_and_grad, x, f, g, direction,
                                    lower, upper, armijo, curvature,
                                    max_line_search)
            if accepted is not None:
                break

        if accepted is None:
            status = "stalled"
            break

        x_new, f_new, g_new = accepted
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
            pairs.append((s, y))
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        iterations += 1

    return SolveResult(
        x=x, fun=f, trace=trace, status=status, iterations=iterations,
        projected_gradient_norm=pg_norm(x, g), grad=g,
    )


def _lbfgs_direction(g, pairs) -> np.ndarray | None:
    """Two-loop recursion; None when no curvature pairs are stored yet."""
    if not pairs:
        return None
    q = g.copy()
    alphas = []
    for s, y in reversed(pairs):
        rho = 1.0 / float(s @ y)
        a = rho * float(s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    s_last, y_last = pairs[-1]
    q *= float(s_last @ y_last) / float(y_last @ y_last)
    for a, rho, s, y in reversed(alphas):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q
