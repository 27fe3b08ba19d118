"""Brute-force control oracle for the state-constraint problem.

The value function is

    u(x) = inf { int_0^inf e^{-t} (c_p |z'|^q + f(z)) dt : z(0) = x, z in [a, b] },

which we approximate by semi-Lagrangian value iteration on a uniform grid
with a symmetric velocity grid, and probe directly by costing explicit
piecewise-linear paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import GridFunction, ProblemSpec, make_exponents

__all__ = [
    "ControlDiscretization",
    "OracleValue",
    "value_iteration",
    "trajectory_cost",
    "legendre_bruteforce",
    "T_MAX",
]

T_MAX = 30.0
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ControlDiscretization:
    dt: float = 0.01
    v_max: float = 4.0
    n_v: int = 161
    tol: float = 1e-12
    max_iter: int = 200_000

    def __post_init__(self):
        if self.dt <= 0 or self.v_max <= 0:
            raise ValueError("dt and v_max must be positive")
        if self.n_v < 3 or self.n_v % 2 == 0:
            raise ValueError("n_v must be odd (the velocity grid contains 0) and at least 3")

    def velocities(self) -> np.ndarray:
        k = np.arange(self.n_v) - self.n_v // 2
        return self.v_max * k / (self.n_v // 2)

    def validate(self, problem: ProblemSpec):
        g = problem.geometry
        if self.dt * self.v_max > 0.25 * g.length + 1e-15:
            raise ValueError("dt * v_max must not exceed a quarter of the interval")
        need = 2.0 * max(problem.f_max(), 0.0) ** (1.0 / problem.exponents.p)
        if self.v_max < need:
            raise ValueError(f"v_max={self.v_max:g} below 2 (max f)^(1/p) = {need:g}")


@dataclass(frozen=True)
class OracleValue:
    u: GridFunction
    dt: float
    v_max: float
    iterations: int
    increment: float
    increments: tuple

    @property
    def values(self) -> np.ndarray:
        return self.u.values


def value_iteration(problem: ProblemSpec, disc: ControlDiscretization | None = None,
                    n: int | None = None) -> OracleValue:
    """Jacobi value iteration to a fixed point of the discrete DPP."""
    disc = disc or ControlDiscretization()
    disc.validate(problem)
    geom = problem.geometry
    n = problem.grid_n if n is None else n
    x = geom.grid(n)
    h = geom.length / (n - 1)
    f = np.asarray(problem.f(x), dtype=float)
    v = disc.velocities()
    running = disc.dt * (problem.exponents.c_p * np.abs(v) ** problem.exponents.q)[None, :] + disc.dt * f[:, None]
    # clamped foot points and their interpolation stencils, fixed for the run
    foot = np.clip(x[:, None] + disc.dt * v[None, :], geom.a, geom.b)
    pos = (foot - geom.a) / h
    left = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
    w = pos - left
    beta = math.exp(-disc.dt)

    u = f.copy()
    increments = []
    inc = math.inf
    it = 0
    for it in range(1, disc.max_iter + 1):
        interp = (1.0 - w) * u[left] + w * u[left + 1]
        new = np.min(running + beta * interp, axis=1)
        inc = float(np.max(np.abs(new - u)))
        u = new
        if len(increments) < 64:
            increments.append(inc)
        if inc <= disc.tol * (1.0 + float(np.max(np.abs(f)))):
            break
    return OracleValue(GridFunction(geom, u), disc.dt, disc.v_max, it, inc, tuple(increments))


def _segment_cost(problem, t0, t1, x0, x1, c_p, q):
    dt = t1 - t0
    v = (x1 - x0) / dt
    kinetic = c_p * abs(v) ** q * (math.exp(-t0) - math.exp(-t1))
    s = 0.5 * (_GL_NODES + 1.0)
    ts = t0 + dt * s
    xs = x0 + (x1 - x0) * s
    running = 0.5 * dt * float(np.sum(_GL_WEIGHTS * np.exp(-ts) * problem.f(xs)))
    return kinetic + running


def trajectory_cost(problem: ProblemSpec, times, positions, t_max: float = T_MAX) -> float:
    """Discounted cost of a piecewise-linear path.

    After the last knot the path parks at its final position; the horizon
    is cut at ``t_max`` and the tail ``e^{-t_max} f(x_end)`` is added.
    """
    t = np.asarray(times, dtype=float)
    xs = np.asarray(positions, dtype=float)
    if t.shape != xs.shape or t.size < 1:
        raise ValueError("times and positions must be matching non-empty sequences")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must start at 0 and increase strictly")
    g = problem.geometry
    if np.any(xs < g.a) or np.any(xs > g.b):
        raise ValueError("path leaves the closed interval")
    exp = problem.exponents
    total = 0.0
    for k in range(t.size - 1):
        if t[k] >= t_max:
            break
        t1 = min(t[k + 1], t_max)
        x1 = xs[k] + (xs[k + 1] - xs[k]) * (t1 - t[k]) / (t[k + 1] - t[k])
        total += _segment_cost(problem, t[k], t1, xs[k], x1, exp.c_p, exp.q)
    t_end = min(t[-1], t_max)
    x_end = xs[-1] if t[-1] <= t_max else x1
    f_end = float(problem.f(np.array([x_end]))[0])
    # parked: int_{t_end}^{t_max} e^{-t} f(x_end) dt, then the tail beyond t_max
    total += f_end * (math.exp(-t_end) - math.exp(-t_max))
    return total + math.exp(-t_max) * f_end


def legendre_bruteforce(p: float, v: float, xi_grid) -> float:
    """``max_xi (v xi - |xi|^p)`` over the supplied grid."""
    xi = np.asarray(xi_grid, dtype=float)
    make_exponents(p)
    if xi.ndim != 1 or xi.size < 3:
        raise ValueError("xi_grid must be a 1-D array with at least 3 points")
    vals = v * xi - np.abs(xi) ** p
    k = int(np.argmax(vals))
    if v != 0.0 and (k == 0 or k == xi.size - 1):
        raise ValueError("maximiser on the edge of xi_grid; widen the span")
    return float(vals[k])
