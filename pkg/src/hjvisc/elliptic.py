"""Monotone finite-difference solver for the viscous blow-up problem.

Interior nodes carry

    u_i + H_G(D^- u_i, D^+ u_i) - f_i - eps (u_{i+1} - 2 u_i + u_{i-1}) / h^2 = 0

with the Godunov flux of ``|s|^p``.  Because ``|s|^p`` is even, convex and
minimal at 0, ``H_G(a, b) = max(max(a, 0), -min(b, 0))^p`` reduces to
``((u_i - min(u_{i-1}, u_{i+1}))_+ / h)^p``, which is what the code uses.

Blow-up at the endpoints is realised either by a sweep of Dirichlet levels
``m`` (the increasing approximation) or by pinning the leading-order
profile on the nodes next to each endpoint.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .core import GridFunction, ProblemSpec

logger = logging.getLogger(__name__)

__all__ = [
    "ViscousConfig",
    "ViscousSolution",
    "SolverError",
    "SweepNotConverged",
    "assemble_residual",
    "solve_dirichlet",
    "solve_blowup",
    "ComparisonReport",
    "discrete_comparison_check",
    "boundary_profile_values",
]

_MU = 1e-8


class SolverError(RuntimeError):
    """Newton and the Gauss-Seidel fallback both stalled."""


class SweepNotConverged(SolverError):
    def __init__(self, last_increment: float, m_last: float):
        super().__init__(
            f"Dirichlet sweep did not settle: last increment {last_increment:.3e} at m={m_last:g}"
        )
        self.last_increment = last_increment
        self.m_last = m_last


@dataclass(frozen=True)
class ViscousConfig:
    boundary_mode: str = "asymptotic_offset"  # or "dirichlet_sweep"
    m_list: tuple | None = None
    n_ghost: int = 2
    max_newton_iters: int = 200
    newton_tol: float = 1e-12
    sweep_stop_tol: float | None = None

    def __post_init__(self):
        if self.boundary_mode not in ("dirichlet_sweep", "asymptotic_offset"):
            raise ValueError(f"unknown boundary_mode {self.boundary_mode!r}")
        if self.m_list is not None:
            m = tuple(float(v) for v in self.m_list)
            if len(m) < 2 or any(b <= a for a, b in zip(m, m[1:])):
                raise ValueError("m_list must be strictly increasing with at least two levels")
            object.__setattr__(self, "m_list", m)
        if self.n_ghost < 1:
            raise ValueError("n_ghost must be >= 1")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")

    def levels(self, fmax: float) -> tuple:
        if self.m_list is not None:
            return self.m_list
        return tuple(fmax + 2.0**k for k in range(21))

    def stop_tol(self, fmax: float) -> float:
        if self.sweep_stop_tol is not None:
            return self.sweep_stop_tol
        return 1e-8 * (1.0 + abs(fmax))


@dataclass(frozen=True)
class ViscousSolution:
    u: GridFunction
    eps: float
    iterations: int
    residual_norm: float
    boundary_mode: str
    m: float | None = None
    sweep_history: tuple = field(default=())

    @property
    def values(self) -> np.ndarray:
        return self.u.values


def _check_grid(n):
    if n < 5:
        raise ValueError(f"grid too coarse: n={n} < 5")


def _upwind_min(ul, ur, policy):
    if policy is None:
        return np.minimum(ul, ur), ul <= ur
    return np.where(policy, ul, ur), policy


def _interior_residual(u, f, eps, h, p, policy=None):
    """Nodal residual; ``policy`` (True = left neighbour) freezes the upwind side."""
    ul, uc, ur = u[:-2], u[1:-1], u[2:]
    m, _ = _upwind_min(ul, ur, policy)
    s = np.maximum(uc - m, 0.0) / h
    return uc + s**p - f[1:-1] - eps * (ur - 2.0 * uc + ul) / h**2


def assemble_residual(u: GridFunction, problem: ProblemSpec, eps: float) -> GridFunction:
    """Scheme residual at interior nodes (boundary entries are zero)."""
    _check_grid(u.n)
    vals = u.values
    if not (np.isfinite(vals[0]) and np.isfinite(vals[-1])):
        raise ValueError("boundary nodes must carry finite values")
    r = np.zeros(u.n)
    r[1:-1] = _interior_residual(vals, problem.f(u.x), eps, u.h, problem.exponents.p)
    return GridFunction(u.geom, r)


def _jacobian_bands(u, eps, h, p, policy=None):
    """Banded Jacobian of the interior residual (smoothed |s|^(p-1) near 0)."""
    ul, uc, ur = u[:-2], u[1:-1], u[2:]
    m, left_is_min = _upwind_min(ul, ur, policy)
    s = np.maximum(uc - m, 0.0) / h
    dh = p * s * (s * s + _MU * _MU) ** ((p - 2.0) / 2.0) / h
    lap = eps / h**2
    diag = 1.0 + dh + 2.0 * lap
    lower = -lap - np.where(left_is_min, dh, 0.0)  # d r_i / d u_{i-1}
    upper = -lap - np.where(left_is_min, 0.0, dh)  # d r_i / d u_{i+1}
    return diag, lower, upper


def _scaled_norm(r, diag, u_int):
    return float(np.max(np.abs(r) / (diag * (1.0 + np.abs(u_int))))) if r.size else 0.0


def _system(u, f, eps, h, p, policy=None, delta=None, exact=False):
    """Residual and Jacobian bands over the unknowns.

    With ``delta = None`` the endpoints are data and the unknowns are
    ``1..n-2``. Otherwise the endpoints are unknowns too, tied to their
    neighbours by ``u_0 - u_1 = delta[0]`` and ``u_{n-1} - u_{n-2} = delta[1]``.
    ``exact`` drops the smoothing of ``|s|^(p-1)`` at 0.
    """
    r = _interior_residual(u, f, eps, h, p, policy)
    if exact:
        ul, uc, ur = u[:-2], u[1:-1], u[2:]
        m, left = _upwind_min(ul, ur, policy)
        dh = p * np.maximum(uc - m, 0.0) ** (p - 1.0) / h**p
        lap = eps / h**2
        diag = 1.0 + dh + 2.0 * lap
        lower = -lap - np.where(left, dh, 0.0)
        upper = -lap - np.where(left, 0.0, dh)
    else:
        diag, lower, upper = _jacobian_bands(u, eps, h, p, policy)
    if delta is None:
        return r, diag, lower, upper
    r = np.r_[u[0] - u[1] - delta[0], r, u[-1] - u[-2] - delta[1]]
    return r, np.r_[1.0, diag, 1.0], np.r_[0.0, lower, -1.0], np.r_[-1.0, upper, 0.0]


def _unknowns(u, delta):
    return u[1:-1] if delta is None else u


def _banded_step(r, diag, lower, upper):
    ab = np.zeros((3, r.size))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    return solve_banded((1, 1), ab, -r, check_finite=False)


def _newton(u, f, eps, h, p, tol, max_iter, policy=None, delta=None):
    """Damped Newton on the unknown nodes."""
    u = u.copy()
    r, diag, lower, upper = _system(u, f, eps, h, p, policy, delta)
    norm = _scaled_norm(r, diag, _unknowns(u, delta))
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return u, it - 1, norm, True
        step = _banded_step(r, diag, lower, upper)
        lam = 1.0
        accepted = False
        for _ in range(40):
            trial = u.copy()
            _unknowns(trial, delta)[:] += lam * step
            sys_t = _system(trial, f, eps, h, p, policy, delta)
            n_t = _scaled_norm(sys_t[0], sys_t[1], _unknowns(trial, delta))
            if np.isfinite(n_t) and (n_t < norm or n_t <= tol):
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            return u, it, norm, False
        u, norm = trial, n_t
        r, diag, lower, upper = sys_t
    return u, max_iter, norm, norm <= tol


def _full_norm(u, f, eps, h, p, delta):
    r, diag, _, _ = _system(u, f, eps, h, p, delta=delta)
    return _scaled_norm(r, diag, _unknowns(u, delta))


def _policy_iteration(u, f, eps, h, p, tol, max_iter, max_policies=100, delta=None):
    """Howard's method: Newton with the upwind side frozen, then re-pick the side.

    Plain Newton can cycle when neighbours nearly tie; with the side frozen
    each inner system is smooth (C^1 for p = 2) and the policies settle.
    """
    total = 0
    policy = u[:-2] <= u[2:]
    norm = math.inf
    for _ in range(max_policies):
        # an inner stall still moves u; re-picking the sides from there helps
        u, its, _, ok = _newton(u, f, eps, h, p, tol, max_iter, policy, delta)
        total += its
        norm = _full_norm(u, f, eps, h, p, delta)
        new = u[:-2] <= u[2:]
        if norm <= tol or (ok and np.array_equal(new, policy)):
            return u, total, norm, norm <= tol
        policy = new
    return u, total, norm, False


def _monotone_newton(u, f, eps, h, p, tol, max_iter=2000, delta=None):
    """Undamped Newton from a supersolution.

    The residual is convex in ``u`` with an M-matrix Jacobian, so every
    iterate stays a supersolution and the sequence decreases to the root.
    """
    u = u.copy()
    norm = math.inf
    for it in range(max_iter + 1):
        r, diag, lower, upper = _system(u, f, eps, h, p, delta=delta, exact=True)
        norm = _scaled_norm(r, diag, _unknowns(u, delta))
        if norm <= tol:
            return u, it, norm, True
        step = _banded_step(r, diag, lower, upper)
        if not np.all(np.isfinite(step)):
            break
        _unknowns(u, delta)[:] += step
    return u, max_iter, norm, False


def _scalar_node_solve(ul, ur, fi, eps, h, p, guess):
    """Root in ``u`` of the nodal equation with neighbours frozen (increasing in u)."""
    lap = eps / h**2
    m = min(ul, ur)

    def g(v):
        s = max(v - m, 0.0) / h
        return v + s**p - fi - lap * (ul + ur - 2.0 * v)

    lo = min(guess, m, fi, ul, ur) - 1.0
    hi = max(guess, m, fi, ul, ur) + 1.0
    while g(lo) > 0:
        lo -= 2.0 * (hi - lo)
    while g(hi) < 0:
        hi += 2.0 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * (1.0 + abs(mid)):
            break
    return 0.5 * (lo + hi)


def _gauss_seidel(u, f, eps, h, p, tol, max_sweeps=20000, delta=None):
    u = u.copy()
    n = u.size
    norm = math.inf
    for sweep in range(1, max_sweeps + 1):
        order = range(1, n - 1) if sweep % 2 else range(n - 2, 0, -1)
        for i in order:
            if delta is not None:
                u[0], u[-1] = u[1] + delta[0], u[-2] + delta[1]
            u[i] = _scalar_node_solve(u[i - 1], u[i + 1], f[i], eps, h, p, u[i])
        if delta is not None:
            u[0], u[-1] = u[1] + delta[0], u[-2] + delta[1]
        norm = _full_norm(u, f, eps, h, p, delta)
        if norm <= tol:
            return u, sweep, norm, True
    return u, max_sweeps, norm, False


def _supersolution(u0, f, eps, h, p, delta):
    """A start above the solution for the monotone Newton fallback."""
    if delta is None:
        # a constant above the data and the boundary values
        top = np.full_like(u0, max(float(np.max(f)), float(u0[0]), float(u0[-1])))
        top[0], top[-1] = u0[0], u0[-1]
        return top
    # the guess lifted until every row is nonnegative
    base = u0.copy()
    base[0], base[-1] = base[1] + delta[0], base[-2] + delta[1]
    lift = max(float(np.max(f)), 0.0) - float(np.min(base)) + 1.0
    for _ in range(60):
        trial = base + lift
        if np.all(_system(trial, f, eps, h, p, delta=delta, exact=True)[0] >= 0.0):
            return trial
        lift *= 2.0
    return base + lift


def _solve_with_boundary(u0, f, eps, h, p, config, delta=None):
    tol = config.newton_tol
    u, its, norm, ok = _newton(u0, f, eps, h, p, tol, config.max_newton_iters, delta=delta)
    if ok:
        return u, its, norm
    logger.info("Newton cycled (scaled residual %.3e); freezing upwind sides", norm)
    u, more, norm, ok = _policy_iteration(u0, f, eps, h, p, tol, config.max_newton_iters, delta=delta)
    its += more
    if ok:
        return u, its, norm
    u, more, norm, ok = _monotone_newton(_supersolution(u0, f, eps, h, p, delta), f, eps, h, p, tol, delta=delta)
    its += more
    if ok:
        return u, its, norm
    logger.warning("Newton stalled (scaled residual %.3e); falling back to Gauss-Seidel", norm)
    u, sweeps, norm, ok = _gauss_seidel(u, f, eps, h, p, tol, delta=delta)
    if not ok:
        raise SolverError(f"Newton and Gauss-Seidel both stalled, scaled residual {norm:.3e}")
    return u, its + sweeps, norm


def _initial_guess(problem, eps, x, cap):
    from .barriers import refined_supersolution

    w = refined_supersolution(problem, eps)
    d = problem.geometry.distance(x)[0]
    guess = np.full(x.size, cap, dtype=float)
    inside = d > 0
    guess[inside] = np.minimum(w.leading(x[inside]) + problem.f(x[inside]), cap)
    return guess


def solve_dirichlet(
    problem: ProblemSpec,
    eps: float,
    m: float,
    config: ViscousConfig | None = None,
    initial: np.ndarray | None = None,
    n: int | None = None,
) -> ViscousSolution:
    """Discrete solution with ``u = m`` at both endpoints."""
    config = config or ViscousConfig()
    n = n or problem.grid_n
    _check_grid(n)
    geom = problem.geometry
    x = geom.grid(n)
    f = problem.f(x)
    if m < float(np.min(f)):
        raise ValueError("Dirichlet level m must be >= min f")
    h = geom.length / (n - 1)
    u0 = _initial_guess(problem, eps, x, m) if initial is None else np.array(initial, dtype=float)
    u0[0] = u0[-1] = m
    u, its, norm = _solve_with_boundary(u0, f, eps, h, problem.exponents.p, config)
    return ViscousSolution(GridFunction(geom, u), float(eps), its, norm, "dirichlet", m=float(m))


def boundary_profile_values(problem: ProblemSpec, eps: float, d):
    """Leading-order blow-up profile ``C_a eps^(a+1) / d^a`` or ``-eps log d``."""
    exp = problem.exponents
    d = np.asarray(d, dtype=float)
    if exp.log_branch:
        return -eps * np.log(d)
    return exp.c_alpha * eps ** (exp.alpha + 1.0) * d ** (-exp.alpha)


def _solve_offset(problem, eps, config, n):
    geom = problem.geometry
    x = geom.grid(n)
    h = geom.length / (n - 1)
    k = config.n_ghost
    if n < 2 * k + 5:
        raise ValueError("grid too coarse for the requested ghost layers")
    d = geom.distance(x)[0]
    f = problem.f(x)
    p = problem.exponents.p
    prof = np.full(n, np.inf)
    prof[1:-1] = boundary_profile_values(problem, eps, d[1:-1])
    pinned = np.r_[1 : k + 1, n - 1 - k : n - 1]
    u = _initial_guess(problem, eps, x, np.inf)
    u[pinned] = prof[pinned] + f[pinned]
    # free nodes are k+1 .. n-2-k; the stencil sees nodes k .. n-1-k
    sub = slice(k, n - k)
    if problem.exponents.log_branch:
        # u = eps log(1/d) + c + o(1) with c fixed by the whole solution, not by
        # f on the boundary: the outermost free nodes follow the profile slope
        # and the constant comes out of the solve
        delta = (prof[k] - prof[k + 1], prof[n - 1 - k] - prof[n - 2 - k])
        u_sub, its, norm = _solve_with_boundary(u[sub], f[sub], eps, h, p, config, delta)
        u[sub] = u_sub
        c = u[[k, n - 1 - k]] - prof[[k, n - 1 - k]]
        u[pinned] = prof[pinned] + np.where(pinned <= k, c[0], c[1])
    else:
        u_sub, its, norm = _solve_with_boundary(u[sub], f[sub], eps, h, p, config)
        u[sub] = u_sub
    u[0] = u[-1] = np.inf
    return ViscousSolution(GridFunction(geom, u), float(eps), its, norm, "asymptotic_offset")


def solve_blowup(
    problem: ProblemSpec, eps: float, config: ViscousConfig | None = None, n: int | None = None
) -> ViscousSolution:
    """Large solution on the grid, by Dirichlet sweep or asymptotic offset."""
    config = config or ViscousConfig()
    n = n or problem.grid_n
    _check_grid(n)
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    if config.boundary_mode == "asymptotic_offset":
        return _solve_offset(problem, eps, config, n)

    geom = problem.geometry
    x = geom.grid(n)
    h = geom.length / (n - 1)
    fmax = float(np.max(problem.f(x)))
    tol = config.stop_tol(fmax)
    # Discrete Dirichlet solutions keep creeping up (like log m) as m grows:
    # the grid cannot carry a jump larger than the profile one node in.
    ceiling = fmax + float(boundary_profile_values(problem, eps, h))
    levels = [m for m in config.levels(fmax) if m < ceiling]
    capped = len(levels) < len(config.levels(fmax))
    if capped:
        levels.append(ceiling)
    watch = geom.distance(x)[0] > 0.5 * geom.delta0

    prev = None
    total = 0
    history = []
    increment = math.inf
    for m in levels:
        init = None
        if prev is not None:
            init = prev.values.copy()
            init[0] = init[-1] = m
        sol = solve_dirichlet(problem, eps, m, config, initial=init, n=n)
        total += sol.iterations
        if prev is not None:
            increment = float(np.max(np.abs(sol.values[watch] - prev.values[watch])))
            history.append((m, increment))
        if increment < tol or (capped and m == ceiling):
            return ViscousSolution(
                sol.u, float(eps), total, sol.residual_norm, "dirichlet_sweep", m=m,
                sweep_history=tuple(history),
            )
        prev = sol
    raise SweepNotConverged(increment, levels[-1])


@dataclass(frozen=True)
class ComparisonReport:
    max_u1_minus_u2: float
    sup_gap: float
    sup_data_gap: float
    tol: float
    ordered: bool
    contraction: bool

    @property
    def passed(self) -> bool:
        return self.ordered and self.contraction


def discrete_comparison_check(problem, eps, u1, u2, f1, f2, tol: float = 1e-10) -> ComparisonReport:
    """Order and sup-norm contraction between two solutions on one grid.

    ``u1``/``u2`` are solutions (or grid functions); ``f1``/``f2`` are the
    data functions used for them. Nodes where either value is infinite are
    skipped.
    """
    g1 = getattr(u1, "u", u1)
    g2 = getattr(u2, "u", u2)
    if not g1.same_grid(g2):
        raise ValueError("solutions live on different grids")
    a, b = g1.values, g2.values
    ok = np.isfinite(a) & np.isfinite(b)
    diff = a[ok] - b[ok]
    x = g1.x
    data_gap = float(np.max(np.abs(f1(x) - f2(x))))
    mx = float(np.max(diff))
    sup = float(np.max(np.abs(diff)))
    return ComparisonReport(mx, sup, data_gap, tol, mx <= tol, sup <= data_gap + tol)
