"""Explicit super- and subsolutions of the viscous blow-up problem.

Three families, all functions of the distance ``d``:

* ``refined_super``:  ``nu C_a eps^(a+1) / d^a + max f + C_d0 eps^(a+2)``
  (``nu eps log(1/d) + max f + C_d0 eps^2`` when ``p = 2``);
* ``upper``: ``(C_a + eta) eps^(a+1) / (d - delta)^a + M``;
* ``lower``: ``(C_a - eta) eps^(a+1) / (d + delta)^a - M``.

Values and both derivatives are closed-form, so the operator
``w + |w'|^p - f - eps w''`` is evaluated without discretisation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ProblemSpec

__all__ = [
    "BarrierParams",
    "Barrier",
    "SignReport",
    "refined_constants",
    "refined_supersolution",
    "ansatz_barrier",
    "residual",
    "verify_sign",
]


@dataclass(frozen=True)
class BarrierParams:
    nu: float
    eta: float = 0.0
    delta_shift: float = 0.0
    m_eta: float = 0.0
    c_delta0: float = 0.0


@dataclass(frozen=True)
class Barrier:
    kind: str  # refined_super | upper | lower
    params: BarrierParams
    problem: ProblemSpec
    eps: float

    @property
    def log_branch(self) -> bool:
        return self.problem.exponents.log_branch

    def _shifted(self, d):
        if self.kind == "lower":
            return d + self.params.delta_shift
        return d - self.params.delta_shift

    def _coefficient(self) -> float:
        """Multiplier of the singular profile."""
        exp = self.problem.exponents
        P = self.params
        eps = self.eps
        if self.kind == "refined_super":
            lead = P.nu
        elif self.kind == "upper":
            lead = (exp.c_alpha + P.eta) / exp.c_alpha if not exp.log_branch else 1.0 + P.eta
        else:
            lead = (exp.c_alpha - P.eta) / exp.c_alpha if not exp.log_branch else 1.0 - P.eta
        if exp.log_branch:
            return lead * eps
        return lead * exp.c_alpha * eps ** (exp.alpha + 1.0)

    def _additive(self) -> float:
        P = self.params
        if self.kind == "refined_super":
            return self.problem.f_max() + P.c_delta0 * self.eps ** (self.problem.exponents.alpha + 2.0)
        if self.kind == "upper":
            return P.m_eta
        return -P.m_eta

    def singular_at(self, x) -> bool:
        d = self.problem.geometry.distance(x)[0]
        return bool(np.any(self._shifted(np.asarray(d)) <= 0.0))

    def evaluate(self, x):
        """Return ``(w, w', w'')`` at ``x`` (array or scalar)."""
        geom = self.problem.geometry
        exp = self.problem.exponents
        d, d1, d2 = geom.distance(x)
        t = self._shifted(np.asarray(d, dtype=float))
        if np.any(t <= 0.0):
            raise ValueError("evaluation point at or beyond the barrier singularity")
        A = self._coefficient()
        if exp.log_branch:
            # A * log(1/t)
            w = -A * np.log(t)
            w1 = -A * d1 / t
            w2 = A * (d1**2 / t**2 - d2 / t)
        else:
            a = exp.alpha
            w = A * t ** (-a)
            w1 = -a * A * t ** (-a - 1.0) * d1
            w2 = a * (a + 1.0) * A * t ** (-a - 2.0) * d1**2 - a * A * t ** (-a - 1.0) * d2
        w = w + self._additive()
        if np.ndim(x) == 0:
            return float(w), float(w1), float(w2)
        return w, w1, w2

    def __call__(self, x):
        return self.evaluate(x)[0]

    def leading(self, x):
        """Value without the additive level."""
        return self.evaluate(x)[0] - self._additive()


def refined_constants(problem: ProblemSpec) -> tuple[float, float]:
    """``(nu, C_d0)`` constructed for the refined supersolution."""
    g = problem.geometry
    exp = problem.exponents
    K0, K1, K2, d0 = g.K0, g.K1, g.K2, g.delta0
    if exp.log_branch:
        nu = 1.0 + K2 * d0
        c_d0 = d0**-2 * nu * (nu * K1**2 + K1**2 + K0 * K2)
        return nu, c_d0
    a, p = exp.alpha, exp.p
    c2 = (a + 1.0) * (1.0 + K2 * d0) ** a * K2
    nu = 1.0 + c2 * d0
    c3 = exp.c_alpha * a * (a + 1.0) * (nu**p * K1**p + nu * K1**2 + nu * K0 * K2 / (a + 1.0))
    return nu, c3 * d0 ** (-(a + 2.0))


def refined_supersolution(problem: ProblemSpec, eps: float, nu: float | None = None) -> Barrier:
    """Refined supersolution; ``nu`` overrides the constructed amplification."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    nu0, c_d0 = refined_constants(problem)
    params = BarrierParams(nu=nu0 if nu is None else float(nu), c_delta0=c_d0)
    return Barrier("refined_super", params, problem, float(eps))


def _upper_level(problem, eps, eta, delta):
    g, exp = problem.geometry, problem.exponents
    K0, K1, K2 = g.K0, g.K1, g.K2
    fmax = problem.f_max()
    if exp.log_branch:
        nu = 1.0 + eta
        thr = min(eta / K2, g.delta0 - delta)
        # -nu eps log t may turn negative only if t > 1
        log_part = max(0.0, nu * eps * math.log(K0)) if K0 > 1 else 0.0
        return fmax + eps**2 * nu * (nu * K1**2 + K1**2 + K0 * K2) / thr**2 + log_part
    a, p, ca = exp.alpha, exp.p, exp.c_alpha
    nu = (ca + eta) / ca
    thr = min((a + 1.0) / K2 * (nu ** (p - 1.0) - 1.0), g.delta0 - delta)
    c = thr ** (-(a + 2.0)) * nu * ca * a * (a + 1.0) * (nu ** (p - 1.0) * K1**p + K1**2 + K2 * K0)
    return fmax + c * eps ** (a + 2.0)


def _lower_level(problem, eps, eta, delta):
    g, exp = problem.geometry, problem.exponents
    K0, K1, K2 = g.K0, g.K1, g.K2
    fmin = problem.f_min()
    if exp.log_branch:
        nu = 1.0 - eta
        thr = g.delta0
        # near-boundary part: -nu eps^2 (1-nu)/t^2 - nu eps log t, maximised over t <= thr
        def g1(t):
            return -nu * eps**2 * (1.0 - nu) / t**2 - nu * eps * math.log(t)

        t_star = math.sqrt(2.0 * eps * (1.0 - nu))
        near = g1(min(t_star, thr))
        far = -nu * eps * math.log(thr) + nu * eps**2 * (K0 + 1.0) * K2 / thr**2
        return max(near, far, 0.0) - fmin
    a, p, ca = exp.alpha, exp.p, exp.c_alpha
    nu = (ca - eta) / ca
    thr = (1.0 - nu ** (p - 1.0)) * a * (a + 1.0) * eps / (1.0 + K2 * a * eps)
    thr = min(thr, g.delta0, 1.0)
    bracket = (
        nu ** (p - 1.0) * K1**p
        + K1**2
        + (K0 + 1.0) * K2 / (a + 1.0)
        + (K0 + 1.0) ** 2 / (a * (a + 1.0) * eps)
    )
    c = thr ** (-(a + 2.0)) * nu * ca * a * (a + 1.0) * bracket
    return c * eps ** (a + 2.0) - fmin


def ansatz_barrier(
    problem: ProblemSpec,
    eps: float,
    kind: str,
    eta: float,
    delta_shift: float = 0.0,
    m_eta: float | None = None,
) -> Barrier:
    """Shifted power (or log) ansatz, upper or lower.

    The additive level is the Case-2 bound of the construction unless
    ``m_eta`` is given.
    """
    if kind not in ("upper", "lower"):
        raise ValueError(f"kind must be 'upper' or 'lower', got {kind!r}")
    exp = problem.exponents
    g = problem.geometry
    cap = 1.0 if exp.log_branch else exp.c_alpha
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta >= cap:
        raise ValueError(f"eta must be below {cap:g} so the lower coefficient stays positive")
    if not 0.0 <= delta_shift < 0.5 * g.delta0:
        raise ValueError("delta_shift must lie in [0, delta0/2)")
    if m_eta is None:
        if eta == 0.0:
            raise ValueError("eta = 0 leaves no room for the level; pass m_eta explicitly")
        level = _upper_level if kind == "upper" else _lower_level
        m_eta = level(problem, eps, eta, delta_shift)
    lead = (cap + eta) / cap if kind == "upper" else (cap - eta) / cap
    params = BarrierParams(nu=lead, eta=float(eta), delta_shift=float(delta_shift), m_eta=float(m_eta))
    return Barrier(kind, params, problem, float(eps))


def residual(problem: ProblemSpec, eps: float, barrier: Barrier, x):
    """``w + |w'|^p - f - eps w''`` from the analytic derivatives."""
    w, w1, w2 = barrier.evaluate(x)
    r = w + np.abs(w1) ** problem.exponents.p - problem.f(np.asarray(x, dtype=float)) - eps * w2
    if np.ndim(x) == 0:
        return float(r)
    return r


@dataclass(frozen=True)
class SignReport:
    kind: str
    sense: str
    n_samples: int
    worst_residual: float
    worst_x: float
    worst_scaled: float
    passed: bool

    def rows(self):
        return [
            ("kind", self.kind),
            ("sense", self.sense),
            ("n_samples", self.n_samples),
            ("worst_residual", self.worst_residual),
            ("worst_x", self.worst_x),
            ("worst_scaled", self.worst_scaled),
            ("pass", int(self.passed)),
        ]


def sample_points(barrier: Barrier, n_samples: int) -> np.ndarray:
    """Uniform interior samples where the barrier is finite (deterministic)."""
    g = barrier.problem.geometry
    lo, hi = g.a, g.b
    if barrier.kind != "lower":
        # keep d - delta > 0: exact distance near the endpoints
        s = barrier.params.delta_shift
        lo, hi = g.a + s, g.b - s
    k = np.arange(1, n_samples + 1)
    return lo + (hi - lo) * k / (n_samples + 1)


def verify_sign(problem, eps, barrier: Barrier, n_samples: int = 10_000, sense: str = "nonneg") -> SignReport:
    """Worst residual over uniform samples against the expected sign.

    The residual may cross zero by at most ``1e-12 * (1 + |w|)``.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    if sense not in ("nonneg", "nonpos"):
        raise ValueError("sense must be 'nonneg' or 'nonpos'")
    xs = sample_points(barrier, n_samples)
    r = residual(problem, eps, barrier, xs)
    w = barrier(xs)
    signed = r if sense == "nonneg" else -r
    scaled = signed / (1.0 + np.abs(w))
    i = int(np.argmin(scaled))
    return SignReport(
        kind=barrier.kind,
        sense=sense,
        n_samples=n_samples,
        worst_residual=float(r[i]),
        worst_x=float(xs[i]),
        worst_scaled=float(scaled[i]),
        passed=bool(scaled[i] >= -1e-12),
    )


def with_nu(barrier: Barrier, nu: float) -> Barrier:
    return replace(barrier, params=replace(barrier.params, nu=float(nu)))
