import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hjvisc import (
    DomainGeometry,
    ProblemSpec,
    c2_compact_bump,
    c2_zero_boundary_bump,
    constant_data,
    extended_distance,
    hat_bump,
    legendre_dual,
    make_exponents,
    sampled_data,
    zero_data,
)
from hjvisc.oracle import legendre_bruteforce

exponents = st.floats(1.05, 2.0)
intervals = st.tuples(st.floats(-3, 3), st.floats(0.2, 5)).map(lambda t: DomainGeometry(t[0], t[0] + t[1]))


def test_exponents_closed_forms():
    e = make_exponents(1.5)
    assert e.q == 3.0
    assert e.alpha == 1.0
    assert e.c_alpha == pytest.approx(4.0)
    assert e.c_p == pytest.approx(0.5 / 1.5**3)
    assert not e.log_branch

    e = make_exponents(1.25)
    assert e.alpha == pytest.approx(3.0)
    assert e.c_alpha == pytest.approx(256.0 / 3.0)

    e = make_exponents(2)
    assert e.log_branch and e.c_alpha is None
    assert e.alpha == 0.0 and e.c_p == 0.25


@pytest.mark.parametrize("p", [1.0, 0.5, 2.0001, 3, math.nan])
def test_exponents_reject_illegal_p(p):
    with pytest.raises(ValueError):
        make_exponents(p)


def test_geometry_constants(unit):
    assert unit.delta0 == 0.25
    assert unit.K1 == 1.0
    assert unit.K2 == pytest.approx(6.0)
    d, d1, d2 = unit.distance(0.5)
    assert d == pytest.approx(unit.K0) == pytest.approx(0.375)
    assert d1 == pytest.approx(0.0, abs=1e-15)


def test_geometry_rejects_empty_interval():
    with pytest.raises(ValueError):
        DomainGeometry(1.0, 1.0)


def test_distance_is_exact_near_the_ends(unit):
    x = np.linspace(0, 0.25, 11)
    d, d1, d2 = extended_distance(unit, x)
    np.testing.assert_allclose(d, x)
    np.testing.assert_allclose(d1, 1.0)
    np.testing.assert_allclose(d2, 0.0)
    d, d1, _ = extended_distance(unit, 1.0 - x)
    np.testing.assert_allclose(d, x, atol=1e-15)
    np.testing.assert_allclose(d1, -1.0)


def test_distance_rejects_outside_points(unit):
    with pytest.raises(ValueError):
        extended_distance(unit, 1.01)


@given(intervals, st.floats(0.01, 0.99))
def test_distance_derivatives_match_differences(geom, s):
    x = geom.a + s * geom.length
    step = 1e-5 * geom.length
    if min(x - geom.a, geom.b - x) < 2 * step:
        return
    dm, _, _ = geom.distance(x - step)
    d0, d1, d2 = geom.distance(x)
    dp, _, _ = geom.distance(x + step)
    assert (dp - dm) / (2 * step) == pytest.approx(d1, abs=1e-6)
    scale = 1.0 / geom.delta0
    assert (dp - 2 * d0 + dm) / step**2 == pytest.approx(d2, abs=1e-3 * scale + 1e-4)


@given(intervals)
def test_distance_bounds(geom):
    x = geom.grid(401)
    d, d1, d2 = geom.distance(x)
    exact = np.minimum(x - geom.a, geom.b - x)
    assert np.all(d <= exact + 1e-12)
    assert np.all(d >= 0)
    assert np.max(d) <= geom.K0 + 1e-12
    assert np.max(np.abs(d1)) <= geom.K1 + 1e-12
    assert np.max(np.abs(d2)) <= geom.K2 * (1 + 1e-12)


@given(exponents, st.floats(-3, 3))
def test_legendre_dual_matches_bruteforce(p, v):
    exp = make_exponents(p)
    xi_star = abs(v / p) ** (1.0 / (p - 1.0))
    assume(xi_star > 1e-200)
    # the maximiser can be tiny for p near 1, so the grid scales with it
    grid = xi_star * np.linspace(-3.0, 3.0, 200001)
    brute = legendre_bruteforce(p, v, grid)
    assert brute == pytest.approx(float(legendre_dual(exp, v)), rel=1e-6)


def test_legendre_dual_at_zero_velocity():
    assert legendre_dual(make_exponents(1.5), 0.0) == 0.0
    assert legendre_bruteforce(1.5, 0.0, np.linspace(-1, 1, 11)) == 0.0


def test_legendre_bruteforce_flags_narrow_grid():
    with pytest.raises(ValueError):
        legendre_bruteforce(1.5, 3.0, np.linspace(-0.1, 0.1, 11))


def test_data_builders(unit):
    x = unit.grid(1001)
    assert np.all(zero_data()(x) == 0.0)
    assert np.all(constant_data(0.7)(x) == 0.7)
    hat = hat_bump(unit, 0.5, 0.5, 1.0)
    assert hat(0.5) == pytest.approx(1.0)
    assert hat(0.0) == 0.0 and hat(1.0) == 0.0
    assert hat.lipschitz_L == pytest.approx(2.0)
    slopes = np.abs(np.diff(hat(x))) / np.diff(x)
    assert slopes.max() <= hat.lipschitz_L + 1e-9
    c2 = c2_compact_bump(unit, 0.5, 0.25, 1.0)
    assert c2.second_derivative is not None
    assert np.max(c2.second_derivative(x)) <= c2.semiconcavity_c + 1e-9
    z = c2_zero_boundary_bump(unit, 1.0)
    assert z(0.0) == pytest.approx(0.0, abs=1e-15)
    assert z.has("zero_on_boundary") and z.has("nonnegative")


def test_sampled_data_is_piecewise_linear(unit):
    f = sampled_data(unit, [0, 0.5, 1], [0, 1, 0])
    assert f(0.25) == pytest.approx(0.5)
    assert f.lipschitz_L == pytest.approx(2.0)


def test_problem_spec_helpers(unit):
    pr = ProblemSpec.build(p=1.5, f=hat_bump(unit, 0.5, 0.5, 2.0), grid_n=65)
    assert pr.f_nodes().shape == (65,)
    assert pr.f_max() == pytest.approx(2.0)
    assert pr.f_min() == 0.0
    assert pr.with_grid(33).grid_n == 33
    assert pr.with_f(zero_data()).f_max() == 0.0
