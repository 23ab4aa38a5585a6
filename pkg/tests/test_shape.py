import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import spence

from mdpart.errors import DomainError
from mdpart.shape import (ShapeConstants, ShapeCurve, Scaling, curve_area, dilog, horizon, li2_one_minus_exp, phi,
                          sample_curve, solve_T_star, solve_Tq, theta, theta_of_T, verify_conservation,
                          verify_duality)

PI2_6 = math.pi**2 / 6
Q_GRID = np.logspace(-3, 3, 50)


def test_dilog_special_values():
    assert dilog(1.0) == PI2_6
    assert dilog(0.0) == 0.0
    assert abs(dilog(0.5) - (math.pi**2 / 12 - math.log(2) ** 2 / 2)) < 1e-15
    with pytest.raises(DomainError):
        dilog(1.2)
    with pytest.raises(DomainError):
        dilog(-0.1)


@given(st.floats(0.0, 1.0))
def test_dilog_vs_oracles(x):
    assert abs(dilog(x) - float(mpmath.polylog(2, x))) <= 1e-12
    assert abs(dilog(x) - spence(1 - x)) <= 1e-12


@pytest.mark.parametrize("x", np.linspace(0.001, 0.999, 101))
def test_dilog_reflection(x):
    assert abs(dilog(x) + dilog(1 - x) - PI2_6 + math.log(x) * math.log(1 - x)) <= 1e-11


@pytest.mark.parametrize("T", [1e-8, 1e-3, 0.3, 0.69, 0.7, 2.0, 20.0, 50.0])
def test_li2_one_minus_exp(T):
    x = -mpmath.expm1(-T)
    assert abs(li2_one_minus_exp(T) - float(mpmath.polylog(2, x))) <= 1e-13 * max(1.0, T)


@pytest.mark.parametrize("q,T", [
    (1, math.log(2)),
    (2, math.log((1 + math.sqrt(5)) / 2)),
    (3, 0.382245),
    (1 / 3, 1.146735),
    (4 / 3, 0.598382),
    (3 / 4, 0.797842),
    (1 / 2, 0.962424),
])
def test_Tq_values(q, T):
    assert abs(solve_Tq(q) - T) <= 1e-6


@pytest.mark.parametrize("q,th", [
    (0, math.pi / math.sqrt(6)),
    (1, math.pi / math.sqrt(12)),
    (2, math.pi / math.sqrt(15)),
    (1 / 2, math.pi / math.sqrt(10)),
    (3, 0.752618),
    (1 / 3, 1.038508),
])
def test_theta_values(q, th):
    assert abs(theta(q) - th) <= 1e-6


def test_closed_forms_are_tight():
    assert abs(solve_Tq(1) - math.log(2)) <= 1e-14
    assert abs(theta(2) ** 2 - math.pi**2 / 15) <= 1e-14
    assert abs(theta(1) ** 2 - math.pi**2 / 12) <= 1e-14


@pytest.mark.parametrize("q", Q_GRID)
def test_root_duality_conservation_on_grid(q):
    T = solve_Tq(q)
    assert abs(math.exp(-q * T) - (1 - math.exp(-T))) <= 1e-12
    assert verify_duality(q)[2] <= 1e-10
    assert verify_conservation(q) <= 1e-10
    # ground-state split: theta^2 - q T^2 / 2 is the free area
    assert abs(theta(q) ** 2 - q * T * T / 2 - li2_one_minus_exp(T)) <= 1e-10


def test_Tq_strictly_decreasing():
    T = [solve_Tq(q) for q in Q_GRID]
    assert all(a > b for a, b in zip(T, T[1:]))


def test_Tq_domain():
    with pytest.raises(DomainError):
        solve_Tq(0.0)
    with pytest.raises(DomainError):
        solve_Tq(-1.0)


def test_duality_examples():
    lhs, rhs, d = verify_duality(4 / 3)
    assert abs(lhs - 0.797842) <= 1e-6 and abs(rhs - 4 / 3 * 0.598382) <= 1e-6
    assert verify_duality(1)[2] == 0.0
    assert abs(verify_duality(2)[0] - 0.962424) <= 1e-6
    assert verify_conservation(7) < 1e-10


def test_theta_of_T():
    assert theta_of_T(0, math.inf) == math.sqrt(PI2_6)
    assert abs(theta_of_T(1, math.log(2)) - math.pi / math.sqrt(12)) < 1e-15
    assert theta_of_T(2.0, 1e-12) < 1e-5
    assert abs(theta_of_T(0, 60.0) - math.pi / math.sqrt(6)) < 1e-15
    with pytest.raises(DomainError):
        theta_of_T(1.0, math.inf)


def test_phi_values():
    T1 = math.log(2)
    assert phi(1, T1, T1) == 0.0
    assert phi(1, T1, 2.0) == 0.0
    assert abs(phi(0, math.inf, math.log(2)) - math.log(2)) < 1e-15
    with pytest.raises(DomainError):
        phi(1, T1, 0.0)
    with pytest.raises(DomainError):
        phi(1, math.inf, 1.0)


def test_phi_at_Tq_matches_short_form():
    for q in (0.5, 1, 2, 3):
        T = solve_Tq(q)
        t = np.linspace(0.01, 2 * T, 300)
        short = np.maximum(0, -q * t - np.log(1 - np.exp(-t)))
        np.testing.assert_allclose(phi(q, T, t), short, atol=1e-12)


def test_phi_cartesian_form():
    q = 2.0
    T = solve_Tq(q)
    x = np.linspace(0.01, T * 0.999, 200)
    y = phi(q, T, x)
    np.testing.assert_allclose(np.exp(-y), np.exp(q * x) * (1 - np.exp(-x)), rtol=1e-12)


@pytest.mark.parametrize("q", [0, 0.01, 0.5, 1, 2, 7, 100])
def test_curve_area_equals_theta_squared(q):
    assert abs(curve_area(q) - theta(q) ** 2) <= 1e-9


def test_curve_area_named_values():
    assert abs(curve_area(1) - math.pi**2 / 12) <= 1e-9
    assert abs(curve_area(0) - PI2_6) <= 1e-9
    assert abs(curve_area(2) - math.pi**2 / 15) <= 1e-9


@pytest.mark.parametrize("q,T", [(1, 0.3), (1, 2.0), (0.5, 5.0), (0, 1.5), (3, 0.1)])
def test_curve_area_off_horizon_vs_quad(q, T):
    ref = quad(lambda t: phi(q, T, t), 0, T, limit=200, epsabs=1e-13)[0]
    assert abs(curve_area(q, T) - ref) <= 1e-9
    assert abs(curve_area(q, T) - theta_of_T(q, T) ** 2) <= 1e-9


def test_T_star():
    T1 = math.log(2)
    assert abs(solve_T_star(1, T1 / theta(1)) - T1) <= 1e-10 * T1
    assert abs(solve_T_star(1, 0.764304) - T1) < 1e-5
    for q in (0.0, 0.5, 2.0):
        for tau in (0.05, 0.3, 0.9):
            if q and tau >= math.sqrt(2 / q):
                continue
            T = solve_T_star(q, tau)
            assert abs(tau * theta_of_T(q, T) - T) <= 1e-10 * T
    taus = [1e-4, 1e-3, 1e-2, 0.1]
    Ts = [solve_T_star(1, t) for t in taus]
    assert all(a < b for a, b in zip(Ts, Ts[1:])) and Ts[0] < 1e-6


def test_T_star_q0_bisection_oracle():
    tau = 0.4
    c = 1 / tau**2
    lo, hi = 1e-6, 50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(mpmath.polylog(2, 1 - mpmath.e**(-mid))) / mid**2 > c:
            lo = mid
        else:
            hi = mid
    assert abs(solve_T_star(0, tau) - lo) <= 1e-10 * lo


def test_T_star_boundary_rejected():
    with pytest.raises(DomainError):
        solve_T_star(1, math.sqrt(2))
    with pytest.raises(DomainError):
        solve_T_star(2, 1.5)


def test_unit_area_curves():
    c = math.pi / math.sqrt(6)
    for x, y in sample_curve(0, None, "unit-area", 50, t_cap=5):
        assert abs(math.exp(-x * c) + math.exp(-y * c) - 1) < 1e-12
    c = math.pi / math.sqrt(12)
    for x, y in sample_curve(1, None, "unit-area", 50)[:-1]:
        assert abs(math.exp(x * c) - math.exp(-y * c) - 1) < 1e-12


@pytest.mark.parametrize("q", [0.5, 1, 2])
def test_intrinsic_trapezoid_area(q):
    pts = np.array(sample_curve(q, None, "intrinsic", 20001))
    x, y = pts[:, 0], pts[:, 1]
    h = x[1] - x[0]
    area = float(np.sum((y[1:] + y[:-1]) * np.diff(x)) / 2)
    missing = quad(lambda t: phi(q, horizon(q), t), 0, h)[0]
    # trapezoid error near the log singularity at 0 is O(h log(1/h))
    assert abs(area + missing - theta(q) ** 2) < 1e-5


def test_sample_curve_args():
    with pytest.raises(ValueError):
        sample_curve(1, None, "intrinsic", 1)
    pts = sample_curve(1, None, Scaling.INTRINSIC, 10)
    assert pts[-1][0] == pytest.approx(math.log(2)) and pts[-1][1] == 0.0


def test_shape_constants():
    c = ShapeConstants.for_q(1)
    assert c.T_q == math.log(2) and abs(c.theta_q - math.pi / math.sqrt(12)) < 1e-15
    assert ShapeConstants.for_q(0).as_dict()["T_q"] is None
    curve = ShapeCurve(1.0, math.log(2), Scaling.UNIT_AREA)
    assert curve.horizon == pytest.approx(0.764304, abs=1e-6)
