"""Projected steepest descent with Barzilai-Borwein steps and Armijo backtracking."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

ARMIJO_SLOPE = 1e-4
SHRINK = 0.5
MIN_STEP = 1e-14


@dataclass
class DescentResult:
    u: np.ndarray
    value: float
    converged: bool
    iterations: int
    stationarity: float


def descent_minimize(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    u_init: np.ndarray,
    config=None,
    *,
    tol: float | None = None,
    max_iters: int | None = None,
    metric: np.ndarray | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> DescentResult:
    """Minimize ``objective`` from ``u_init``.

    The search direction is ``-gradient / metric`` (a diagonal preconditioner),
    optionally followed by ``project`` onto a convex feasible set.  Convergence
    is declared when the projected-gradient step
    ``max|u - project(u - gradient/metric)|`` is at most ``tol``.

    ``tol`` and ``max_iters`` default to ``config.descent_tol`` and
    ``config.max_iters``.  When the iteration cap is hit or the line search
    stalls, the best iterate is returned with ``converged=False``.
    """
    if tol is None:
        tol = config.descent_tol
    if max_iters is None:
        max_iters = config.max_iters
    P = project if project is not None else (lambda v: v)
    D = np.ones_like(u_init) if metric is None else np.asarray(metric, dtype=float)

    u = P(np.array(u_init, dtype=float))
    f = float(objective(u))
    g = gradient(u)

    def stationarity(u, g):
        return float(np.max(np.abs(u - P(u - g / D)), initial=0.0))

    res = stationarity(u, g)
    if res <= tol:
        return DescentResult(u, f, True, 0, res)

    alpha = 1.0
    for it in range(1, max_iters + 1):
        step = alpha
        while True:
            trial = P(u - step * g / D)
            d = trial - u
            f_trial = float(objective(trial))
            # a few ulps of slack so roundoff near the minimum does not stall the search
            slack = 8.0 * np.finfo(float).eps * max(1.0, abs(f))
            if f_trial <= f + ARMIJO_SLOPE * float(g @ d) + slack:
                break
            step *= SHRINK
            if step < MIN_STEP * alpha:
                log.warning("line search stalled at iteration %d (residual %.3e)", it, res)
                return DescentResult(u, f, False, it, res)
        g_new = gradient(trial)
        s = trial - u
        y = g_new - g
        sy = float(s @ y)
        alpha = float(s @ (D * s)) / sy if sy > 0 else 1.0
        alpha = min(max(alpha, 1e-10), 1e10)
        u, f, g = trial, f_trial, g_new
        res = stationarity(u, g)
        if res <= tol:
            return DescentResult(u, f, True, it, res)
    log.warning("descent reached max_iters=%d (residual %.3e)", max_iters, res)
    return DescentResult(u, f, False, max_iters, res)
