"""The acceptance suite: twelve desk-scale checks with fixed tolerances.

``run_criterion(k)`` returns an :class:`Outcome`; ``CRITERIA`` lists the
checks in order (the CLI prints it with ``--list-checks``).
"""

from __future__ import annotations

import filecmp
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis as an
from .barriers import ansatz_barrier, refined_constants, refined_supersolution, verify_sign
from .core import (
    DomainGeometry,
    ProblemSpec,
    c2_compact_bump,
    c2_zero_boundary_bump,
    hat_bump,
    sampled_data,
    zero_data,
)
from .elliptic import ViscousConfig, solve_blowup
from .experiments import lower_deviation, sandwich_check
from .oracle import ControlDiscretization, value_iteration
from .state_constraint import solve_state_constraint

__all__ = ["Outcome", "Criterion", "CRITERIA", "run_criterion", "EPS_LADDER"]

GEOM = DomainGeometry(0.0, 1.0)
N_FINE = 4097
EPS_LADDER = (0.05, 0.025, 0.0125, 0.00625, 0.003125)
OFFSET = ViscousConfig(boundary_mode="asymptotic_offset")


@dataclass(frozen=True)
class Outcome:
    passed: bool
    detail: str


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    run: Callable[[], Outcome]


def _profile(p, tol):
    pr = ProblemSpec.build(p=p, f=zero_data(), grid_n=N_FINE, epsilons=(0.05,))
    devs = {}
    for mode in ("asymptotic_offset", "dirichlet_sweep"):
        u = solve_blowup(pr, 0.05, ViscousConfig(boundary_mode=mode)).u
        devs[mode] = an.boundary_profile(u, 0.05, (2.0, 10.0), pr.exponents).max_deviation
    ok = all(v <= tol for v in devs.values())
    return Outcome(ok, ", ".join(f"{k}: max dev {v:.4f}" for k, v in devs.items()) + f" (tol {tol})")


def c1_profile():
    return _profile(1.5, 0.15)


def c2_profile_log():
    return _profile(2.0, 0.25)


def c3_interior_rate():
    eps = (0.1, 0.05, 0.025, 0.0125)
    pr = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=N_FINE, epsilons=eps)
    u0 = solve_state_constraint(pr).u
    errs = [(e, an.error_interior(solve_blowup(pr, e, OFFSET).u, u0, 0.25)) for e in eps]
    rep = an.fit_rate(errs, 2.0, 0.3)
    return Outcome(rep.passed, f"slope {rep.fitted_slope:.4f} (need >= 1.7)")


def c4_two_sided():
    f = hat_bump(GEOM, 0.5, 0.5, 1.0)
    ok = True
    parts = []
    for p in (1.5, 2.0):
        pr = ProblemSpec.build(p=p, f=f, grid_n=N_FINE, epsilons=EPS_LADDER)
        u0 = solve_state_constraint(pr).u
        two, cs = [], []
        for e in EPS_LADDER:
            u = solve_blowup(pr, e, OFFSET).u
            two.append((e, an.error_interior(u, u0, max(e, 2.0 * u.h))))
            cs.append(lower_deviation(u, u0, e)[1])
        rep = an.fit_rate(two, 0.5, 0.1)
        hi, lo = max(cs), min(cs)
        spread = 1.0 if hi == 0.0 else (hi / lo if lo > 0 else math.inf)
        ok &= rep.passed and spread < 2.0
        parts.append(f"p={p:g}: slope {rep.fitted_slope:.4f}, lower C max {hi:.3g} spread {spread:.3f}")
    return Outcome(ok, "; ".join(parts))


def c5_corrected():
    f = c2_zero_boundary_bump(GEOM, 1.0)
    pr = ProblemSpec.build(p=1.5, f=f, grid_n=N_FINE, epsilons=EPS_LADDER)
    nu, _ = refined_constants(pr)
    u0 = solve_state_constraint(pr).u
    errs = [(e, max(an.error_corrected(solve_blowup(pr, e, OFFSET).u, u0, e, nu, pr.exponents), 1e-14))
            for e in EPS_LADDER]
    rep = an.fit_rate(errs, 1.0 / 1.5, 0.1)
    return Outcome(rep.passed, f"slope {rep.fitted_slope:.4f} (need >= {1 / 1.5 - 0.1:.4f})")


def c6_barriers():
    f = hat_bump(GEOM, 0.5, 0.5, 1.0)
    bad = []
    for p in (1.25, 1.5, 1.75, 2.0):
        pr = ProblemSpec.build(p=p, f=f, grid_n=N_FINE, epsilons=(0.1, 0.01))
        cap = 1.0 if pr.exponents.log_branch else pr.exponents.c_alpha
        for e in (0.1, 0.01):
            checks = [(refined_supersolution(pr, e), "nonneg")]
            for frac in (0.2, 0.5):
                checks.append((ansatz_barrier(pr, e, "upper", frac * cap), "nonneg"))
                checks.append((ansatz_barrier(pr, e, "lower", frac * cap), "nonpos"))
            for bar, sense in checks:
                if not verify_sign(pr, e, bar, 10_000, sense).passed:
                    bad.append(f"sign {bar.kind} p={p:g} eps={e:g}")
    n_solved = 0
    for p in (1.5, 1.75, 2.0):
        pr = ProblemSpec.build(p=p, f=f, grid_n=N_FINE, epsilons=(0.1, 0.01))
        for e in (0.1, 0.01):
            u = solve_blowup(pr, e, OFFSET).u
            n_solved += 1
            for eta, mu, ml, ok in sandwich_check(pr, e, u):
                if not ok:
                    bad.append(f"sandwich p={p:g} eps={e:g} eta={eta:g}")
    return Outcome(not bad, f"{n_solved} solutions sandwiched; " + ("all signs hold" if not bad else "; ".join(bad)))


def c7_oracle():
    f = hat_bump(GEOM, 0.5, 0.25, 1.0)
    ok = True
    parts = []
    for p in (1.5, 2.0):
        pr = ProblemSpec.build(p=p, f=f, grid_n=201)
        gaps = []
        for n, dt, nv in ((201, 0.01, 161), (401, 0.005, 321)):
            uo = value_iteration(pr, ControlDiscretization(dt=dt, v_max=4.0, n_v=nv), n=n).values
            us = solve_state_constraint(pr, n=n).values
            gaps.append(float(np.max(np.abs(uo - us))))
        order = math.log2(gaps[0] / gaps[1])
        ok &= gaps[0] <= 0.05 and order >= 0.7
        parts.append(f"p={p:g}: gap {gaps[0]:.4g}, order {order:.3f}")
    return Outcome(ok, "; ".join(parts))


def _random_pair(rng, knots=7):
    xs = np.linspace(0.0, 1.0, knots)
    f1 = rng.uniform(0.0, 1.0, knots)
    f2 = f1 + rng.uniform(0.0, 0.5, knots) * (rng.uniform(size=knots) < 0.6)
    return sampled_data(GEOM, xs, f1), sampled_data(GEOM, xs, f2)


def c8_comparison():
    rng = np.random.default_rng(20240601)
    worst_order = -math.inf
    worst_floor = -math.inf
    for k in range(100):
        p = (1.5, 2.0, 1.25, 1.75)[k % 4]
        f1, f2 = _random_pair(rng)
        pr1 = ProblemSpec.build(p=p, f=f1, grid_n=257)
        pr2 = pr1.with_f(f2)
        fmin1, fmin2 = pr1.f_min(), pr2.f_min()
        s1, s2 = solve_state_constraint(pr1).values, solve_state_constraint(pr2).values
        v1, v2 = solve_blowup(pr1, 0.05, OFFSET).values, solve_blowup(pr2, 0.05, OFFSET).values
        fin = np.isfinite(v1)
        disc = ControlDiscretization(dt=0.02, v_max=4.0, n_v=81, tol=1e-14)
        o1 = value_iteration(pr1, disc, n=101).values
        o2 = value_iteration(pr2, disc, n=101).values
        worst_order = max(worst_order, float(np.max(s1 - s2)), float(np.max(v1[fin] - v2[fin])),
                          float(np.max(o1 - o2)))
        worst_floor = max(worst_floor, fmin1 - float(np.min(s1)), fmin1 - float(np.min(v1[fin])),
                          fmin1 - float(np.min(o1)), fmin2 - float(np.min(s2)), fmin2 - float(np.min(v2[fin])),
                          fmin2 - float(np.min(o2)))
    worst_cut = -math.inf
    for f in (hat_bump(GEOM, 0.5, 0.5, 1.0), hat_bump(GEOM, 0.45, 0.3, 0.7), c2_zero_boundary_bump(GEOM, 1.0)):
        for p in (1.5, 2.0):
            pr = ProblemSpec.build(p=p, f=f, grid_n=1025)
            u, v = solve_state_constraint(pr).values, solve_blowup(pr, 0.05, OFFSET).values
            for kappa in (0.2, 0.1, 0.05):
                fk = an.build_cutoff(f, an.CutoffSpec(kappa, "lipschitz_min"), GEOM)
                prk = pr.with_f(fk)
                gap_f = float(np.max(np.abs(pr.f_nodes() - prk.f_nodes())))
                uk, vk = solve_state_constraint(prk).values, solve_blowup(prk, 0.05, OFFSET).values
                fin = np.isfinite(v)
                worst_cut = max(worst_cut, float(np.max(np.abs(u - uk))) - gap_f,
                                float(np.max(np.abs(v[fin] - vk[fin]))) - gap_f)
    ok = worst_order <= 1e-10 and worst_floor <= 1e-10 and worst_cut <= 1e-10
    return Outcome(ok, f"max(u1 - u2) {worst_order:.3g}, max(min f - u) {worst_floor:.3g}, "
                       f"max cutoff excess {worst_cut:.3g}")


def c9_semiconcavity():
    ok = True
    parts = []
    hat = hat_bump(GEOM, 0.5, 0.5, 1.0)
    c2 = c2_compact_bump(GEOM, 0.5, 0.25, 1.0)
    for p in (1.5, 2.0):
        pr = ProblemSpec.build(p=p, f=hat, grid_n=N_FINE)
        rep = an.semiconcavity_scan(solve_state_constraint(pr).u)
        ok &= -1.3 <= rep.exponent <= -0.7
        parts.append(f"hat p={p:g}: exponent {rep.exponent:.3f}")
        pr = pr.with_f(c2)
        rep = an.semiconcavity_scan(solve_state_constraint(pr).u)
        ok &= rep.uniform_constant <= 1.1 * c2.semiconcavity_c
        parts.append(f"c2 p={p:g}: max ratio {rep.uniform_constant:.3f} vs {1.1 * c2.semiconcavity_c:.3f}")
    return Outcome(ok, "; ".join(parts))


def c10_gradient():
    eps = (0.1, 0.05, 0.025)
    pr = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=N_FINE, epsilons=eps)
    rep = an.gradient_bound_check([(e, solve_blowup(pr, e, OFFSET).u) for e in eps], pr.exponents)
    return Outcome(rep.passed, f"C={rep.constant:.4g}, per-eps {', '.join(f'{c:.4g}' for c in rep.per_eps)}")


def c11_cutoff():
    x = GEOM.grid(40001)
    hat = hat_bump(GEOM, 0.5, 0.5, 1.0)
    kappas = (0.16, 0.08, 0.04, 0.02)
    lip_ok = True
    for kappa in kappas:
        fk = an.build_cutoff(hat, an.CutoffSpec(kappa, "lipschitz_min"), GEOM)
        lip_ok &= float(np.max(hat(x) - fk(x))) <= hat.lipschitz_L * kappa
    f = c2_zero_boundary_bump(GEOM, 1.0)
    gaps = []
    for kappa in kappas:
        fk = an.build_cutoff(f, an.CutoffSpec(kappa, "smooth_chi"), GEOM)
        gaps.append((kappa, float(np.max(f(x) - fk(x)))))
    rep = an.fit_rate(gaps, 2.0, 0.3)
    return Outcome(lip_ok and rep.passed, f"lipschitz gap <= L kappa: {lip_ok}; smooth order {rep.fitted_slope:.4f}")


DETERMINISM_CONFIG = """
[problem]
p = 1.5
grid_n = 513
eps = [0.1, 0.05, 0.025]

[data]
kind = "bump"
smoothness = "c2_zero_boundary"
height = 1.0

[experiment]
dt = 0.02
n_v = 81
kappas = [0.16, 0.08, 0.04]
"""


def c12_determinism():
    from .config import parse_config
    from .experiments import run_experiment

    mismatched = []
    n_files = 0
    with tempfile.TemporaryDirectory() as tmp:
        for name in ("solve", "rates", "barriers", "profile", "gradient", "semiconcavity", "oracle", "cutoff"):
            cfg = parse_config(DETERMINISM_CONFIG, name)
            if name == "barriers":
                cfg.params["n_samples"] = 1000
            runs = []
            for k in range(2):
                out = Path(tmp) / f"{name}_{k}"
                st = run_experiment(cfg, out)
                runs.append(sorted(p.relative_to(out) for p in st.files))
            if runs[0] != runs[1]:
                mismatched.append(f"{name}: file sets differ")
                continue
            for rel in runs[0]:
                n_files += 1
                if not filecmp.cmp(Path(tmp) / f"{name}_0" / rel, Path(tmp) / f"{name}_1" / rel, shallow=False):
                    mismatched.append(f"{name}/{rel}")
    return Outcome(not mismatched, f"{n_files} files compared" + (": " + ", ".join(mismatched) if mismatched else ""))


CRITERIA = (
    Criterion(1, "boundary profile p=1.5: |d u/(4 eps^2) - 1| <= 0.15 on d in [2eps, 10eps]", c1_profile),
    Criterion(2, "boundary profile p=2: |-u/(eps log d) - 1| <= 0.25 on d in [2eps, 10eps]", c2_profile_log),
    Criterion(3, "constant data: interior error slope >= 1.7 (p=1.5)", c3_interior_rate),
    Criterion(4, "Lipschitz data: two-sided slope >= 0.4 and uniform lower sqrt(eps) constant", c4_two_sided),
    Criterion(5, "C2 data vanishing to first order: corrected one-sided slope >= 1/p - 0.1", c5_corrected),
    Criterion(6, "barrier residual signs and the barrier sandwich", c6_barriers),
    Criterion(7, "state-constraint scheme vs value iteration: gap <= 0.05, order >= 0.7", c7_oracle),
    Criterion(8, "comparison, lower bound and cutoff contraction battery", c8_comparison),
    Criterion(9, "semiconcavity: Lipschitz exponent in [-1.3, -0.7], C2 ratio <= 1.1 c_f", c9_semiconcavity),
    Criterion(10, "gradient boundary layer constant uniform within 2x", c10_gradient),
    Criterion(11, "cutoffs: Lipschitz gap <= L kappa, smooth gap order >= 1.7", c11_cutoff),
    Criterion(12, "determinism: identical configs give byte-identical outputs", c12_determinism),
)


def run_criterion(number: int) -> Outcome:
    return CRITERIA[number - 1].run()
