"""Monotone upwind solver for the first-order state-constraint problem.

Interior nodes solve ``u_i + ((u_i - min(u_{i-1}, u_{i+1}))_+ / h)^p = f_i``.
At an endpoint only the inward neighbour enters the flux, which is the
discrete form of "supersolution up to the boundary".  The Dirichlet variant
pins the endpoint values instead.

Iteration is nonlinear Gauss-Seidel with alternating sweep direction,
started from ``u = f``.  Since ``f`` is a supersolution of the scheme the
iterates decrease monotonically to the fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridFunction, ProblemSpec

__all__ = [
    "ScSolution",
    "ScNotConverged",
    "node_update",
    "scheme_residual",
    "solve_state_constraint",
    "solve_dirichlet_first_order",
]

MAX_SWEEPS = 100_000


class ScNotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class ScSolution:
    u: GridFunction
    interior_residual: float
    closure_residual: float
    iterations: int

    @property
    def values(self) -> np.ndarray:
        return self.u.values


def node_update(m: float, fi: float, h: float, p: float) -> float:
    """Solve ``u + ((u - m)_+ / h)^p = fi`` for ``u``.

    The left side is strictly increasing in ``u`` so the root is unique.
    """
    if fi <= m:
        return fi
    r = fi - m
    # t = (u - m)/h solves h t + t^p = r
    if p == 2.0:
        t = 2.0 * r / (h + math.sqrt(h * h + 4.0 * r))
        return m + h * t
    t = min(r / h, r ** (1.0 / p))
    # Newton from above on a convex increasing function: monotone, no overshoot
    for _ in range(100):
        g = h * t + t**p - r
        step = g / (h + p * t ** (p - 1.0))
        t -= step
        if step <= 1e-15 * t:
            break
    return m + h * t


def scheme_residual(u: np.ndarray, f: np.ndarray, h: float, p: float, closure: str = "state") -> np.ndarray:
    """Nodal residual ``u_i + H_G - f_i``; endpoints zero under ``closure='dirichlet'``."""
    r = np.empty_like(u)
    m = np.minimum(u[:-2], u[2:])
    r[1:-1] = u[1:-1] + (np.maximum(u[1:-1] - m, 0.0) / h) ** p - f[1:-1]
    if closure == "state":
        r[0] = u[0] + (max(u[0] - u[1], 0.0) / h) ** p - f[0]
        r[-1] = u[-1] + (max(u[-1] - u[-2], 0.0) / h) ** p - f[-1]
    else:
        r[0] = r[-1] = 0.0
    return r


def _sweep(u, f, h, p, forward, pinned):
    n = len(u)
    change = 0.0
    order = range(n) if forward else range(n - 1, -1, -1)
    for i in order:
        if i == 0:
            if pinned:
                continue
            m = u[1]
        elif i == n - 1:
            if pinned:
                continue
            m = u[n - 2]
        else:
            m = min(u[i - 1], u[i + 1])
        new = node_update(m, f[i], h, p)
        change = max(change, abs(new - u[i]))
        u[i] = new
    return change


def _solve(problem: ProblemSpec, n, boundary, tol, max_sweeps):
    geom = problem.geometry
    p = problem.exponents.p
    n = problem.grid_n if n is None else n
    if n < 3:
        raise ValueError("need at least 3 nodes")
    x = geom.grid(n)
    h = geom.length / (n - 1)
    f = np.asarray(problem.f(x), dtype=float)
    if tol is None:
        tol = 1e-10 * (1.0 + float(np.max(np.abs(f))))
    pinned = boundary is not None
    u = f.copy()
    if pinned:
        u[0], u[-1] = boundary
    vals = u.tolist()
    fl = f.tolist()
    for sweep in range(1, max_sweeps + 1):
        change = _sweep(vals, fl, h, p, sweep % 2 == 1, pinned)
        # two quiet sweeps in opposite directions: nothing left to propagate
        if change <= tol and sweep >= 2:
            break
    else:
        raise ScNotConverged(f"no fixed point after {max_sweeps} sweeps (last change {change:.3e})")
    u = np.array(vals)
    r = scheme_residual(u, f, h, p, "dirichlet" if pinned else "state")
    interior = float(np.max(np.abs(r[1:-1])))
    # closure only needs the supersolution side
    closure = 0.0 if pinned else float(max(0.0, -min(r[0], r[-1])))
    return ScSolution(GridFunction(geom, u), interior, closure, sweep)


def solve_state_constraint(problem: ProblemSpec, n: int | None = None, tol: float | None = None,
                           max_sweeps: int = MAX_SWEEPS) -> ScSolution:
    """State-constraint solution on ``n`` nodes (default ``problem.grid_n``)."""
    return _solve(problem, n, None, tol, max_sweeps)


def solve_dirichlet_first_order(problem: ProblemSpec, g_a: float = 0.0, g_b: float = 0.0, n: int | None = None,
                                tol: float | None = None, max_sweeps: int = MAX_SWEEPS) -> ScSolution:
    """Same scheme with ``u(a) = g_a`` and ``u(b) = g_b``."""
    return _solve(problem, n, (float(g_a), float(g_b)), tol, max_sweeps)
