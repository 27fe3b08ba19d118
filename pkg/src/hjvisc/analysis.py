"""Error norms, rate fits, boundary and gradient probes, semiconcavity scans
and the two cutoff constructions for the data.

All probes skip nodes closer than ``2 h`` to the boundary, where the grid
does not resolve the blow-up profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataFunction, DomainGeometry, Exponents, GridFunction

__all__ = [
    "RateReport",
    "ProfileReport",
    "GradientReport",
    "SemiconcavityReport",
    "CutoffSpec",
    "error_interior",
    "error_corrected",
    "corrected_gap",
    "fit_rate",
    "boundary_profile",
    "boundary_correction",
    "gradient_bound_check",
    "semiconcavity_scan",
    "build_cutoff",
    "smooth_step",
]

DEFAULT_MARGIN = 0.1


def _shared(u1: GridFunction, u2: GridFunction):
    if not u1.same_grid(u2):
        raise ValueError("grid functions live on different grids")


def _resolved(u: GridFunction, floor: float | None = None) -> np.ndarray:
    d = u.d
    floor = 2.0 * u.h if floor is None else floor
    return (d >= floor - 1e-12 * u.h) & np.isfinite(u.values)


def error_interior(u_eps: GridFunction, u: GridFunction, delta: float) -> float:
    """``max |u_eps - u|`` over nodes with ``d >= delta``."""
    _shared(u_eps, u)
    if delta < 2.0 * u.h - 1e-12 * u.h:
        raise ValueError(f"delta={delta:g} below the resolution floor 2h={2 * u.h:g}")
    mask = _resolved(u_eps, delta)
    if not mask.any():
        raise ValueError(f"no nodes with d >= {delta:g}")
    return float(np.max(np.abs(u_eps.values[mask] - u.values[mask])))


def boundary_correction(exp: Exponents, eps: float, nu: float, d) -> np.ndarray:
    """``nu C_a eps^(a+1) / d^a``, or ``nu eps log(1/d)`` when ``p = 2``."""
    d = np.asarray(d, dtype=float)
    if exp.log_branch:
        return -nu * eps * np.log(d)
    return nu * exp.c_alpha * eps ** (exp.alpha + 1.0) / d**exp.alpha


def corrected_gap(u_eps: GridFunction, u: GridFunction, eps: float, nu: float, exp: Exponents):
    """Nodal ``u_eps - u - correction`` on resolved nodes, with their distances."""
    _shared(u_eps, u)
    mask = _resolved(u_eps)
    d = u.d[mask]
    gap = u_eps.values[mask] - u.values[mask] - boundary_correction(exp, eps, nu, d)
    return d, gap


def error_corrected(u_eps: GridFunction, u: GridFunction, eps: float, nu: float, exp: Exponents) -> float:
    """Signed ``max (u_eps - u - correction)`` over nodes with ``d >= 2h``."""
    _, gap = corrected_gap(u_eps, u, eps, nu, exp)
    return float(np.max(gap))


@dataclass(frozen=True)
class RateReport:
    eps_list: tuple
    error_list: tuple
    fitted_slope: float
    intercept: float
    fit_residual: float
    target_slope: float
    margin: float
    passed: bool
    excluded_zero: tuple = ()

    @property
    def constant(self) -> float:
        return math.exp(self.intercept)


def fit_rate(pairs, target_slope: float = 0.5, margin: float = DEFAULT_MARGIN) -> RateReport:
    """Least-squares slope of ``log error`` against ``log eps``.

    Exactly zero errors are dropped and recorded in ``excluded_zero``.
    """
    pairs = [(float(e), float(r)) for e, r in pairs]
    if any(e <= 0 or not math.isfinite(r) for e, r in pairs):
        raise ValueError("eps must be positive and errors finite")
    zeros = tuple(e for e, r in pairs if r == 0.0)
    if any(r < 0 for _, r in pairs):
        raise ValueError("errors must be nonnegative")
    kept = [(e, r) for e, r in pairs if r > 0.0]
    if len(kept) < 3:
        raise ValueError(f"need at least 3 positive errors, got {len(kept)}")
    le = np.log([e for e, _ in kept])
    lr = np.log([r for _, r in kept])
    slope, intercept = np.polyfit(le, lr, 1)
    resid = float(np.max(np.abs(lr - (slope * le + intercept))))
    return RateReport(
        eps_list=tuple(e for e, _ in kept),
        error_list=tuple(r for _, r in kept),
        fitted_slope=float(slope),
        intercept=float(intercept),
        fit_residual=resid,
        target_slope=float(target_slope),
        margin=float(margin),
        passed=bool(slope >= target_slope - margin),
        excluded_zero=zeros,
    )


@dataclass(frozen=True)
class ProfileReport:
    d: np.ndarray
    ratio: np.ndarray
    max_deviation: float
    band: tuple


def boundary_profile(u_eps: GridFunction, eps: float, band: tuple, exp: Exponents) -> ProfileReport:
    """Ratio of ``u_eps`` to its leading boundary profile on ``c1 eps <= d <= c2 eps``."""
    c1, c2 = band
    if not 0 < c1 < c2:
        raise ValueError("band must satisfy 0 < c1 < c2")
    d = u_eps.d
    mask = (d >= c1 * eps) & (d <= c2 * eps) & _resolved(u_eps)
    if mask.sum() < 5:
        raise ValueError(f"band [{c1 * eps:g}, {c2 * eps:g}] holds fewer than 5 nodes")
    dd = d[mask]
    ratio = u_eps.values[mask] / boundary_correction(exp, eps, 1.0, dd)
    return ProfileReport(dd, ratio, float(np.max(np.abs(ratio - 1.0))), (c1, c2))


def _gradient_magnitude(u: GridFunction) -> np.ndarray:
    v = u.values
    g = np.full(u.n, np.nan)
    diff = np.abs(np.diff(v)) / u.h
    g[1:-1] = np.maximum(diff[:-1], diff[1:])
    return g


@dataclass(frozen=True)
class GradientReport:
    constant: float
    per_eps: tuple
    spread: float
    passed: bool


def gradient_bound_check(sweep, exp: Exponents) -> GradientReport:
    """Smallest ``C`` with ``|Du| <= C (1 + (eps/d)^(a+1))`` over a sweep.

    ``sweep`` is a sequence of ``(eps, GridFunction)`` on one grid.  The
    bound counts as uniform when the per-eps constants stay within a
    factor 2 of each other.
    """
    sweep = list(sweep)
    if len(sweep) < 3:
        raise ValueError("need at least 3 eps values")
    first = sweep[0][1]
    per = []
    for eps, u in sweep:
        _shared(first, u)
        mask = _resolved(u)
        mask[0] = mask[-1] = False
        du = _gradient_magnitude(u)
        if u.n > 2:
            # the two-sided stencil reaches one node further in
            mask[1:-1] &= np.isfinite(u.values[:-2]) & np.isfinite(u.values[2:])
        d = u.d[mask]
        shape = 1.0 + (eps / d) ** (exp.alpha + 1.0)
        per.append(float(np.max(du[mask] / shape)) if mask.any() else 0.0)
    c = max(per)
    lo = min(per)
    spread = c / lo if lo > 0 else (1.0 if c == 0 else math.inf)
    return GradientReport(c, tuple(per), spread, bool(spread < 2.0))


@dataclass(frozen=True)
class SemiconcavityReport:
    d: np.ndarray
    ratio: np.ndarray
    exponent: float
    uniform_constant: float
    n_fit: int


def semiconcavity_scan(u: GridFunction, steps=(1, 2, 4)) -> SemiconcavityReport:
    """Largest second-difference ratio per node over admissible probe steps.

    A step ``k h`` is admissible at ``x`` when ``k h <= d(x)/4`` and both
    ``x +- k h`` are grid nodes.  The exponent is the log-log slope of the
    positive ratios against ``d`` on the half of the admissible nodes
    closest to the boundary.
    """
    v = u.values
    n = u.n
    d = u.d
    ratio = np.full(n, -np.inf)
    for k in steps:
        hk = k * u.h
        i = np.arange(k, n - k)
        ok = hk <= d[i] / 4.0 + 1e-12 * u.h
        i = i[ok]
        r = (v[i + k] - 2.0 * v[i] + v[i - k]) / hk**2
        ratio[i] = np.maximum(ratio[i], r)
    adm = np.isfinite(ratio)
    if not adm.any():
        raise ValueError("no node admits a probe step; refine the grid")
    dd, rr = d[adm], ratio[adm]
    near = dd <= np.median(dd)
    pos = near & (rr > 0)
    exponent = math.nan
    if pos.sum() >= 3:
        exponent = float(np.polyfit(np.log(dd[pos]), np.log(rr[pos]), 1)[0])
    return SemiconcavityReport(dd, rr, exponent, float(max(np.max(rr), 0.0)), int(pos.sum()))


@dataclass(frozen=True)
class CutoffSpec:
    kappa: float
    mode: str = "lipschitz_min"  # or "smooth_chi"

    def __post_init__(self):
        if self.mode not in ("lipschitz_min", "smooth_chi"):
            raise ValueError(f"unknown cutoff mode {self.mode!r}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def _phi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(s):
    """C-infinity step: 0 for ``s <= 1``, 1 for ``s >= 2``, slope at most 2."""
    s = np.asarray(s, dtype=float)
    a = _phi(s - 1.0)
    b = _phi(2.0 - s)
    return a / (a + b)


def _smooth_step_derivs(s, ds=1e-4):
    # derivatives by central differences of a smooth explicit function
    c0 = smooth_step(s)
    cp = smooth_step(s + ds)
    cm = smooth_step(s - ds)
    return c0, (cp - cm) / (2 * ds), (cp - 2 * c0 + cm) / ds**2


def build_cutoff(f: DataFunction, spec: CutoffSpec, geom: DomainGeometry) -> DataFunction:
    """Cut ``f`` off near the boundary.

    ``lipschitz_min``: zero for ``d < kappa/2``, ``min(2L(d - kappa/2), f)``
    on ``kappa/2 <= d <= kappa`` and ``f`` beyond.
    ``smooth_chi``: ``f * chi(d/kappa)`` with the C-infinity step ``chi``.
    """
    kappa = spec.kappa
    if kappa >= geom.delta0:
        raise ValueError(f"kappa={kappa:g} must be below delta0={geom.delta0:g}")
    if not (f.has("nonnegative") and f.has("zero_on_boundary")):
        raise ValueError("cutoff needs nonnegative data vanishing on the boundary")
    L = f.lipschitz_L
    if spec.mode == "lipschitz_min":

        def fk(x):
            x = np.asarray(x, dtype=float)
            d = geom.distance(x)[0]
            val = np.asarray(f(x), dtype=float)
            ring = (d >= 0.5 * kappa) & (d <= kappa)
            out = np.where(d < 0.5 * kappa, 0.0, val)
            return np.where(ring, np.minimum(2.0 * L * (d - 0.5 * kappa), val), out)

        return DataFunction(
            evaluator=fk,
            lipschitz_L=2.0 * L,
            tags=frozenset((f.tags & {"nonnegative", "zero_on_boundary"}) | {"compact"}),
            support_kappa=0.5 * kappa,
            name=f"{f.name}|lip_cut({kappa:g})",
        )

    if not (f.has("zero_gradient_on_boundary") and f.has("c2")):
        raise ValueError("smooth cutoff needs C^2 data with zero value and gradient on the boundary")

    def fk(x):
        x = np.asarray(x, dtype=float)
        d = geom.distance(x)[0]
        return np.asarray(f(x), dtype=float) * smooth_step(d / kappa)

    f2 = None
    if f.second_derivative is not None:

        def f2(x, _h=1e-5):
            x = np.asarray(x, dtype=float)
            d, d1, d2 = geom.distance(x)
            c, c1, c2 = _smooth_step_derivs(d / kappa)
            fv = np.asarray(f(x), dtype=float)
            xp = np.clip(x + _h, geom.a, geom.b)
            xm = np.clip(x - _h, geom.a, geom.b)
            f1 = (f(xp) - f(xm)) / (xp - xm)
            chi1 = c1 * d1 / kappa
            chi2 = c2 * d1**2 / kappa**2 + c1 * d2 / kappa
            return f.second_derivative(x) * c + 2.0 * f1 * chi1 + fv * chi2

    return DataFunction(
        evaluator=fk,
        # f <= L d <= 2 L kappa where chi' lives, and chi' <= 2
        lipschitz_L=5.0 * L,
        tags=frozenset((f.tags & {"nonnegative", "zero_on_boundary", "zero_gradient_on_boundary", "c2"}) | {"compact"}),
        support_kappa=kappa,
        name=f"{f.name}|smooth_cut({kappa:g})",
        second_derivative=f2,
    )
