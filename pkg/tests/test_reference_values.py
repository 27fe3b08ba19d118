"""Hand-checkable values and small closed-form cases across the modules."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.linalg import solve_banded

from hjvisc import (
    ControlDiscretization,
    DomainGeometry,
    GridFunction,
    ProblemSpec,
    ViscousConfig,
    ansatz_barrier,
    c2_compact_bump,
    constant_data,
    extended_distance,
    hat_bump,
    legendre_dual,
    make_exponents,
    refined_supersolution,
    residual,
    solve_blowup,
    solve_dirichlet,
    solve_dirichlet_first_order,
    solve_state_constraint,
    value_iteration,
    zero_data,
)
from hjvisc.analysis import CutoffSpec, build_cutoff, error_corrected, error_interior, fit_rate
from hjvisc.barriers import refined_constants
from hjvisc.elliptic import discrete_comparison_check
from hjvisc.experiments import sandwich_check
from hjvisc.oracle import legendre_bruteforce

GEOM = DomainGeometry(0.0, 1.0)


def log_transform_reference(f, eps, n, guess):
    """Quadratic case through ``u = -eps log(phi)``.

    ``phi`` solves ``eps^2 phi'' = phi (f + eps log phi)`` with ``phi = 0`` at
    both ends, a problem with no blow-up and no upwinding. Centered
    differences and damped Newton (phi stays positive).
    """
    x = GEOM.grid(n)
    h = 1.0 / (n - 1)
    fv = f(x)
    phi = np.exp(-guess / eps)
    phi[0] = phi[-1] = 0.0
    k = eps**2 / h**2
    for _ in range(200):
        q = phi[1:-1]
        r = -k * (phi[2:] - 2 * q + phi[:-2]) + q * (fv[1:-1] + eps * np.log(q))
        ab = np.zeros((3, n - 2))
        ab[0, 1:] = -k
        ab[2, :-1] = -k
        ab[1] = 2 * k + fv[1:-1] + eps * np.log(q) + eps
        step = solve_banded((1, 1), ab, -r)
        lam = 1.0
        while np.any(q + lam * step <= 0):
            lam *= 0.5
        phi[1:-1] = q + lam * step
        if np.max(np.abs(step)) < 1e-14 * np.max(phi):
            break
    with np.errstate(divide="ignore"):
        return -eps * np.log(phi)


def test_exponents_at_four_thirds():
    e = make_exponents(4.0 / 3.0)
    assert e.alpha == pytest.approx(2.0)
    assert e.c_alpha == pytest.approx(13.5)
    assert e.q == pytest.approx(4.0)


def test_blend_value_against_quadrature():
    # d = delta0 + integral of the smoothstep slope 1 - 3s^2 + 2s^3
    d0 = GEOM.delta0
    slope = lambda t: 1 - 3 * ((t - d0) / d0) ** 2 + 2 * ((t - d0) / d0) ** 3
    want = d0 + quad(slope, d0, 0.4)[0]
    d, d1, _ = extended_distance(GEOM, 0.4)
    assert d == pytest.approx(want, rel=1e-12)
    assert d1 == pytest.approx(slope(0.4), rel=1e-12)
    assert d == pytest.approx(0.3622, abs=5e-5)
    assert d1 == pytest.approx(0.352)


@pytest.mark.parametrize("p, v, want", [(2.0, 2.0, 1.0), (1.5, 1.0, 0.5 * 1.5**-3), (1.5, 0.0, 0.0)])
def test_legendre_values(p, v, want):
    assert legendre_dual(make_exponents(p), v) == pytest.approx(want, rel=1e-12)
    grid = np.linspace(-4, 4, 800001)
    assert legendre_bruteforce(p, v, grid) == pytest.approx(want, rel=1e-8, abs=1e-12)
    assert want == pytest.approx(0.148148, abs=1e-6) or p == 2.0 or v == 0.0


@pytest.mark.parametrize("p", [1.5, 2.0])
def test_refined_supersolution_by_substitution(p):
    pr = ProblemSpec.build(p=p, f=zero_data())
    nu, c = refined_constants(pr)
    x = np.linspace(0.01, 0.99, 99)
    d = extended_distance(GEOM, x)[0]
    w = refined_supersolution(pr, 0.1)(x)
    if p == 1.5:
        want = nu * 4 * 0.01 / d + c * 0.001
    else:
        want = nu * 0.1 * np.log(1 / d) + c * 0.01
    np.testing.assert_allclose(w, want, rtol=1e-12)
    assert nu == pytest.approx(8.5 if p == 1.5 else 2.5)


def test_ansatz_with_no_slack_coincides():
    pr = ProblemSpec.build(p=1.5, f=zero_data())
    x = np.linspace(0.02, 0.98, 49)
    up = ansatz_barrier(pr, 0.05, "upper", 0.0, m_eta=0.3)
    lo = ansatz_barrier(pr, 0.05, "lower", 0.0, m_eta=0.3)
    np.testing.assert_allclose(up(x) - lo(x), 0.6, rtol=1e-12)
    d = extended_distance(GEOM, x)[0]
    np.testing.assert_allclose(up.leading(x), 4 * 0.05**2 / d, rtol=1e-12)


def test_residual_shifts_with_the_level():
    pr = ProblemSpec.build(p=1.5, f=hat_bump(GEOM, 0.5, 0.5, 1.0))
    x = np.linspace(0.05, 0.95, 37)
    a = ansatz_barrier(pr, 0.05, "upper", 0.5, m_eta=0.0)
    b = ansatz_barrier(pr, 0.05, "upper", 0.5, m_eta=1.0)
    np.testing.assert_allclose(residual(pr, 0.05, b, x) - residual(pr, 0.05, a, x), 1.0, rtol=1e-12)


def test_sandwich_at_a_tenth_of_the_cap():
    pr = ProblemSpec.build(p=1.5, f=hat_bump(GEOM, 0.5, 0.5, 1.0), grid_n=1025)
    u = solve_blowup(pr, 0.05).u
    (eta, upper, lower, ok), = sandwich_check(pr, 0.05, u, eta_fractions=(0.1,))
    assert eta == pytest.approx(0.4)
    assert ok, (upper, lower)


def test_dirichlet_small_cases():
    zero = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=129)
    assert np.all(solve_dirichlet(zero, 0.1, 0.0).values == 0.0)
    one = ProblemSpec.build(p=1.5, f=constant_data(1.0), grid_n=129)
    u = solve_dirichlet(one, 0.1, 5.0).values
    assert np.all(u >= 1.0 - 1e-12) and np.all(u <= 5.0 + 1e-12)
    hat = ProblemSpec.build(p=1.5, f=hat_bump(GEOM, 0.5, 0.5, 1.0), grid_n=129)
    u10 = solve_dirichlet(hat, 0.1, 10.0).values
    u20 = solve_dirichlet(hat, 0.1, 20.0).values
    assert np.all(u10 <= u20 + 1e-12)


def test_zero_data_value_below_the_constant_data_bound():
    pr = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=1025)
    u = solve_blowup(pr, 0.05).values
    _, c = refined_constants(pr)
    assert u[512] <= 4 * 0.05**2 / 0.5 + c * 0.05**3


@pytest.mark.parametrize(
    "p",
    [
        1.5,
        # the gap is first order with constant 5.4 on 513..4097 nodes
        pytest.param(2.0, marks=pytest.mark.xfail(strict=True, reason="mode gap is 5.4 h, above 5 h")),
    ],
)
def test_boundary_modes_agree_away_from_the_boundary(p):
    n = 1025
    pr = ProblemSpec.build(p=p, f=hat_bump(GEOM, 0.5, 0.5, 1.0), grid_n=n)
    cfg = ViscousConfig(boundary_mode="dirichlet_sweep")
    a = solve_blowup(pr, 0.05).u
    b = solve_blowup(pr, 0.05, cfg).u
    inner = a.d >= 0.1
    tol = max(cfg.stop_tol(1.0), 5.0 / (n - 1))
    assert np.max(np.abs(a.values[inner] - b.values[inner])) <= tol


@pytest.mark.parametrize("f", [zero_data(), hat_bump(GEOM, 0.5, 0.5, 1.0)], ids=["zero", "hat"])
def test_quadratic_case_against_the_log_transform(f):
    n = 4097
    pr = ProblemSpec.build(p=2.0, f=f, grid_n=n)
    u = solve_blowup(pr, 0.05).u
    ref = log_transform_reference(f, 0.05, n, np.where(np.isfinite(u.values), u.values, 0.0))
    inner = u.d >= 0.1
    assert np.max(np.abs(u.values[inner] - ref[inner])) <= 5e-3


def test_comparison_report_cases():
    pr = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=257)
    one = constant_data(1.0)
    bump = c2_compact_bump(GEOM, 0.5, 0.25, 1.0)
    u0 = solve_blowup(pr, 0.05)
    u1 = solve_blowup(pr.with_f(one), 0.05)
    rep = discrete_comparison_check(pr, 0.05, u0, u1, zero_data(), one)
    assert rep.passed and rep.sup_gap <= 1.0 + rep.tol
    same = discrete_comparison_check(pr, 0.05, u0, u0, zero_data(), zero_data())
    assert same.sup_gap == 0.0
    lifted = lambda x: 0.3 * bump(x)
    from hjvisc.core import DataFunction

    f2 = DataFunction(lifted, 0.3 * bump.lipschitz_L)
    u2 = solve_blowup(pr.with_f(f2), 0.05)
    rep = discrete_comparison_check(pr, 0.05, u0, u2, zero_data(), f2)
    assert rep.passed and rep.sup_gap <= 0.3 + rep.tol


def test_state_constraint_small_cases():
    zero = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=257)
    assert np.all(solve_state_constraint(zero).values == 0.0)
    assert np.all(solve_dirichlet_first_order(zero).values == 0.0)
    bump = ProblemSpec.build(p=1.5, f=c2_compact_bump(GEOM, 0.5, 0.25, 1.0), grid_n=257)
    u = solve_state_constraint(bump).u
    assert np.all(u.values[u.d < 0.25] == 0.0)
    assert np.all(u.values >= 0.0)


def test_oracle_on_zero_data():
    pr = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=65)
    val = value_iteration(pr, ControlDiscretization(dt=0.02, v_max=2.0, n_v=41))
    assert np.all(np.abs(val.values) == 0.0)


def test_interior_error_small_cases():
    pr = ProblemSpec.build(p=1.5, f=hat_bump(GEOM, 0.5, 0.5, 1.0), grid_n=257)
    ue = solve_blowup(pr, 0.05).u
    u = solve_state_constraint(pr).u
    assert error_interior(u, u, 0.1) == 0.0
    errs = [error_interior(ue, u, d) for d in (0.05, 0.1, 0.2, 0.35)]
    assert errs == sorted(errs, reverse=True)
    gap = ue.values - u.values
    mask = (u.d >= 2 * u.h) & np.isfinite(gap)
    assert error_corrected(ue, u, 0.05, 0.0, pr.exponents) == pytest.approx(np.max(gap[mask]))


def test_zero_data_corrected_error_below_the_constant():
    pr = ProblemSpec.build(p=1.5, f=zero_data(), grid_n=1025)
    ue = solve_blowup(pr, 0.05).u
    zero = GridFunction(GEOM, np.zeros(1025))
    nu, c = refined_constants(pr)
    assert error_corrected(ue, zero, 0.05, nu, pr.exponents) <= c * 0.05**3


@pytest.mark.parametrize("mode", ["lipschitz_min", "smooth_chi"])
def test_cutoff_of_zero_is_zero(mode):
    fk = build_cutoff(zero_data(), CutoffSpec(0.1, mode), GEOM)
    assert np.all(fk(GEOM.grid(201)) == 0.0)


def test_rate_of_the_disjoint_support_target():
    eps = [0.1, 0.05, 0.025, 0.0125]
    rep = fit_rate([(e, 3.0 * e**2) for e in eps], target_slope=2.0)
    assert rep.fitted_slope == pytest.approx(2.0)
    assert rep.passed
