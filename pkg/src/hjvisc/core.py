"""Interval geometry, exponent algebra, data functions and grid containers.

Everything here is immutable and shared by the solvers. The domain is an
interval ``(a, b)``; the distance function is the exact distance to the
nearest endpoint inside the strips of width ``delta0`` and a C^2 smoothstep
blend in the middle, so that ``d``, ``d'`` and ``d''`` are available in
closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainGeometry",
    "Exponents",
    "DataFunction",
    "GridFunction",
    "ProblemSpec",
    "make_exponents",
    "extended_distance",
    "legendre_dual",
    "zero_data",
    "constant_data",
    "hat_bump",
    "c2_compact_bump",
    "c2_zero_boundary_bump",
    "sampled_data",
]


@dataclass(frozen=True)
class DomainGeometry:
    """The interval ``(a, b)`` with its blended distance function."""

    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.b <= self.a:
            raise ValueError(f"need finite a < b, got a={self.a}, b={self.b}")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def delta0(self) -> float:
        return 0.25 * self.length

    @property
    def K0(self) -> float:
        # d(midpoint) = delta0 + delta0 * int_0^1 (1 - 3s^2 + 2s^3) ds
        return 1.5 * self.delta0

    @property
    def K1(self) -> float:
        return 1.0

    @property
    def K2(self) -> float:
        # max of 6 s (1 - s) / delta0 at s = 1/2
        return 1.5 / self.delta0

    def distance(self, x):
        """Vectorised ``(d, d', d'')`` at points of ``[a, b]``."""
        return extended_distance(self, x)

    def grid(self, n: int) -> np.ndarray:
        return self.a + (self.b - self.a) * np.arange(n) / (n - 1)


def _blend_left(t, delta0):
    # t = distance from a, in [delta0, 2*delta0]
    s = (t - delta0) / delta0
    d = delta0 + delta0 * (s - s**3 + 0.5 * s**4)
    d1 = 1.0 - 3.0 * s**2 + 2.0 * s**3
    d2 = -6.0 * s * (1.0 - s) / delta0
    return d, d1, d2


def extended_distance(geom: DomainGeometry, x):
    """Return ``(d, d', d'')`` at ``x``; scalars in, scalars out.

    Raises ``ValueError`` if any point lies outside ``[a, b]``.
    """
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    tol = 1e-12 * geom.length
    if np.any(xs < geom.a - tol) or np.any(xs > geom.b + tol):
        raise ValueError(f"points outside [{geom.a}, {geom.b}]")
    xs = np.clip(xs, geom.a, geom.b)
    delta0 = geom.delta0
    mid = 0.5 * (geom.a + geom.b)

    left = xs <= mid
    t = np.where(left, xs - geom.a, geom.b - xs)
    sign = np.where(left, 1.0, -1.0)

    d = t.copy()
    d1 = np.ones_like(t)
    d2 = np.zeros_like(t)
    inner = t > delta0
    if np.any(inner):
        bd, bd1, bd2 = _blend_left(t[inner], delta0)
        d[inner], d1[inner], d2[inner] = bd, bd1, bd2
    d1 = d1 * sign
    if scalar:
        return float(d[0]), float(d1[0]), float(d2[0])
    return d, d1, d2


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float
    alpha: float
    c_alpha: float | None
    c_p: float
    log_branch: bool


def make_exponents(p: float) -> Exponents:
    """Derived constants for the Hamiltonian ``|s|**p`` with ``1 < p <= 2``."""
    p = float(p)
    if not (1.0 < p <= 2.0):
        raise ValueError(f"p must lie in (1, 2], got {p}")
    q = p / (p - 1.0)
    alpha = (2.0 - p) / (p - 1.0)
    log_branch = p == 2.0
    c_alpha = None if log_branch else (alpha + 1.0) ** (alpha + 1.0) / alpha
    c_p = (p - 1.0) * p ** (-q)
    return Exponents(p=p, q=q, alpha=alpha, c_alpha=c_alpha, c_p=c_p, log_branch=log_branch)


def legendre_dual(exp: Exponents, v):
    """Running cost ``c_p |v|**q`` conjugate to ``|xi|**p``."""
    return exp.c_p * np.abs(v) ** exp.q


@dataclass(frozen=True)
class DataFunction:
    """A data function ``f`` on ``[a, b]`` with declared regularity tags.

    ``tags`` may contain ``nonnegative``, ``zero_on_boundary``,
    ``zero_gradient_on_boundary``, ``c2`` and ``compact``; ``support_kappa``
    is set when ``f`` vanishes wherever ``d < support_kappa``.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    tags: frozenset = frozenset()
    support_kappa: float | None = None
    semiconcavity_c: float | None = None
    name: str = "custom"
    second_derivative: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self.evaluator(x), dtype=float) + np.zeros_like(x)

    def has(self, tag: str) -> bool:
        return tag in self.tags


def zero_data() -> DataFunction:
    return DataFunction(
        evaluator=lambda x: np.zeros_like(x),
        lipschitz_L=0.0,
        tags=frozenset({"nonnegative", "zero_on_boundary", "zero_gradient_on_boundary", "c2"}),
        semiconcavity_c=0.0,
        name="zero",
        second_derivative=lambda x: np.zeros_like(x),
    )


def constant_data(c: float) -> DataFunction:
    c = float(c)
    tags = {"c2", "zero_gradient_on_boundary"}
    if c >= 0:
        tags.add("nonnegative")
    if c == 0:
        tags.add("zero_on_boundary")
    return DataFunction(
        evaluator=lambda x: np.full_like(x, c),
        lipschitz_L=0.0,
        tags=frozenset(tags),
        semiconcavity_c=0.0,
        name=f"constant({c:g})",
        second_derivative=lambda x: np.zeros_like(x),
    )


def _support_kappa(geom, center, width):
    lo, hi = center - width, center + width
    if lo < geom.a or hi > geom.b:
        return None
    # smallest distance from the support to the boundary, measured by d
    kappa = min(lo - geom.a, geom.b - hi)
    return kappa if kappa > 0 else None


def hat_bump(geom: DomainGeometry, center: float, width: float, height: float) -> DataFunction:
    """Tent ``height * max(0, 1 - |x - center| / width)``."""
    if width <= 0 or height < 0:
        raise ValueError("hat needs width > 0 and height >= 0")

    def f(x):
        return height * np.maximum(0.0, 1.0 - np.abs(x - center) / width)

    kappa = _support_kappa(geom, center, width)
    tags = {"nonnegative"}
    if abs(f(np.array([geom.a]))[0]) + abs(f(np.array([geom.b]))[0]) == 0.0:
        tags.add("zero_on_boundary")
    if kappa is not None:
        tags.add("compact")
    return DataFunction(
        evaluator=f,
        lipschitz_L=height / width,
        tags=frozenset(tags),
        support_kappa=kappa,
        name=f"hat({center:g},{width:g},{height:g})",
    )


def c2_compact_bump(geom: DomainGeometry, center: float, width: float, height: float) -> DataFunction:
    """``height * (1 - r^2)^3`` for ``r = |x - center| / width < 1``; C^2 with compact support."""
    if width <= 0 or height < 0:
        raise ValueError("bump needs width > 0 and height >= 0")

    def f(x):
        r2 = ((x - center) / width) ** 2
        return height * np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 3, 0.0)

    def f2(x):
        r2 = ((x - center) / width) ** 2
        inside = r2 < 1.0
        w = 1.0 - np.minimum(r2, 1.0)
        return np.where(inside, height * (-6.0 * w**2 + 24.0 * r2 * w) / width**2, 0.0)

    # max |f'| at r^2 = 1/5; max f'' at r^2 = 1/2 and the foot
    L = height * 6.0 / math.sqrt(5.0) * (4.0 / 5.0) ** 2 / width
    c = float(np.max(f2(center + width * np.linspace(-1, 1, 20001))))
    kappa = _support_kappa(geom, center, width)
    tags = {"nonnegative", "c2"}
    if kappa is not None:
        tags |= {"compact", "zero_on_boundary", "zero_gradient_on_boundary"}
    return DataFunction(
        evaluator=f,
        lipschitz_L=L,
        tags=frozenset(tags),
        support_kappa=kappa,
        semiconcavity_c=c,
        name=f"c2_compact({center:g},{width:g},{height:g})",
        second_derivative=f2,
    )


def c2_zero_boundary_bump(geom: DomainGeometry, height: float) -> DataFunction:
    """``height * 16 s^2 (1 - s)^2`` with ``s = (x - a)/(b - a)``: f = f' = 0 on the boundary."""
    ell = geom.length

    def f(x):
        s = (x - geom.a) / ell
        return height * 16.0 * s**2 * (1.0 - s) ** 2

    def f2(x):
        s = (x - geom.a) / ell
        return height * 16.0 * (2.0 - 12.0 * s + 12.0 * s**2) / ell**2

    # f' = 32 h s (1-s)(1-2s)/ell, maximal at s = (3 - sqrt 3)/6
    s_star = (3.0 - math.sqrt(3.0)) / 6.0
    L = height * 32.0 * s_star * (1 - s_star) * (1 - 2 * s_star) / ell
    return DataFunction(
        evaluator=f,
        lipschitz_L=L,
        tags=frozenset({"nonnegative", "zero_on_boundary", "zero_gradient_on_boundary", "c2"}),
        semiconcavity_c=height * 32.0 / ell**2,
        name=f"c2_zero_boundary({height:g})",
        second_derivative=f2,
    )


def sampled_data(geom: DomainGeometry, xs: Sequence[float], values: Sequence[float]) -> DataFunction:
    """Piecewise-linear data through user samples."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(values, dtype=float)
    if xs.ndim != 1 or xs.shape != vs.shape or xs.size < 2:
        raise ValueError("samples need matching 1D x and value arrays of length >= 2")
    if np.any(np.diff(xs) <= 0):
        raise ValueError("sample abscissae must be strictly increasing")
    if xs[0] > geom.a or xs[-1] < geom.b:
        raise ValueError("samples must cover [a, b]")
    L = float(np.max(np.abs(np.diff(vs) / np.diff(xs))))
    tags = set()
    if np.all(vs >= 0):
        tags.add("nonnegative")
    fa, fb = np.interp([geom.a, geom.b], xs, vs)
    if fa == 0.0 and fb == 0.0:
        tags.add("zero_on_boundary")
    return DataFunction(
        evaluator=lambda x: np.interp(x, xs, vs),
        lipschitz_L=L,
        tags=frozenset(tags),
        name="samples",
    )


@dataclass(frozen=True)
class GridFunction:
    """Nodal values on the uniform grid of ``geom`` with ``n`` nodes."""

    geom: DomainGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("grid values must be a 1D array with at least two nodes")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.geom.length / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return self.geom.grid(self.n)

    @property
    def d(self) -> np.ndarray:
        return self.geom.distance(self.x)[0]

    def same_grid(self, other: "GridFunction") -> bool:
        return self.geom == other.geom and self.n == other.n


@dataclass(frozen=True)
class ProblemSpec:
    geometry: DomainGeometry
    exponents: Exponents
    f: DataFunction
    epsilons: tuple = ()
    grid_n: int = 1025

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        if any(not (0.0 < e < 1.0) for e in eps):
            raise ValueError("every epsilon must lie in (0, 1)")
        if any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.grid_n < 5:
            raise ValueError("grid_n must be at least 5")

    @classmethod
    def build(cls, p=1.5, f=None, a=0.0, b=1.0, epsilons=(), grid_n=1025):
        geom = DomainGeometry(a, b)
        return cls(geom, make_exponents(p), f if f is not None else zero_data(), tuple(epsilons), grid_n)

    @property
    def x(self) -> np.ndarray:
        return self.geometry.grid(self.grid_n)

    def f_nodes(self, n: int | None = None) -> np.ndarray:
        return self.f(self.geometry.grid(n or self.grid_n))

    def with_f(self, f: DataFunction) -> "ProblemSpec":
        return ProblemSpec(self.geometry, self.exponents, f, self.epsilons, self.grid_n)

    def with_grid(self, n: int) -> "ProblemSpec":
        return ProblemSpec(self.geometry, self.exponents, self.f, self.epsilons, n)

    def f_max(self) -> float:
        return float(np.max(self.f_nodes()))

    def f_min(self) -> float:
        return float(np.min(self.f_nodes()))
