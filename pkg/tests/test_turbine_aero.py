import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zsource_wind.errors import DomainError
from zsource_wind.turbine_aero import (CpCurve, TurbineParams, cp_eval, opt_power, speed_ref,
                                       tip_speed_ratio, turbine_torque, wind_power)

TP = TurbineParams()
CP = CpCurve()


def test_defaults_consistent():
    assert TP.swept_area == pytest.approx(7.0686, abs=1e-4)
    assert TP.k_omega == TP.lambda_opt / TP.blade_radius
    assert TurbineParams.from_radius(2.0).swept_area == pytest.approx(math.pi * 4.0, rel=1e-15)


@pytest.mark.parametrize("kw", [dict(rho=0), dict(blade_radius=-1), dict(cp_opt=0.6),
                                dict(cp_opt=0.0), dict(lambda_opt=0)])
def test_params_rejected(kw):
    with pytest.raises(DomainError):
        TurbineParams(**kw)


@pytest.mark.parametrize("omega,v,r,expected", [(46.667, 10, 1.5, 7.0), (0.0, 10, 1.5, 0.0),
                                                (7.0, 1.0, 1.0, 7.0)])
def test_tip_speed_ratio(omega, v, r, expected):
    p = TurbineParams.from_radius(r)
    assert tip_speed_ratio(omega, v, p) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("v", [0.0, -3.0])
def test_tip_speed_ratio_bad_wind(v):
    with pytest.raises(DomainError):
        tip_speed_ratio(10.0, v, TP)


def test_cp_eval_examples():
    assert cp_eval(CP, 7.0) == 0.45
    assert cp_eval(CP, 0.0) == 0.0
    assert cp_eval(CP, 3.5) == pytest.approx(0.3375, rel=1e-15)
    assert cp_eval(CP, 20.0) == 0.0
    with pytest.raises(DomainError):
        cp_eval(CP, -0.1)


def test_wind_power_examples():
    # direct arithmetic: 0.5 * 1.225 * pi*1.5^2 * 1000 * 0.45
    assert wind_power(10, 46.667, TP, CP) == pytest.approx(1948.3, abs=0.05)
    assert wind_power(10, 0.0, TP, CP) == 0.0
    assert wind_power(5, 23.333, TP, CP) == pytest.approx(243.5, abs=0.05)


def test_opt_power_examples():
    assert opt_power(46.667, TP) == pytest.approx(1948.4, rel=1e-4)
    assert opt_power(0.0, TP) == 0.0
    assert opt_power(93.333, TP) == pytest.approx(15586, rel=1e-4)


def test_speed_ref_examples():
    assert speed_ref(10, TP) == pytest.approx(46.667, abs=1e-3)
    assert speed_ref(0, TP) == 0.0
    assert speed_ref(11.357, TP) == pytest.approx(53.0, abs=0.01)


def test_torque_finite_at_standstill():
    t0 = turbine_torque(10.0, 0.0, TP, CP)
    assert math.isfinite(t0) and t0 > 0
    assert turbine_torque(10.0, 1e-3, TP, CP) == pytest.approx(t0, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 25.0))
def test_grid_search_maximum_is_cubic_law(v):
    # oracle: brute-force maximum of wind_power over 10^4 speeds
    w_star = speed_ref(v, TP)
    grid = np.linspace(0.0, 2.0 * w_star, 10_001)
    p = np.array([wind_power(v, w, TP, CP) for w in grid])
    k = int(np.argmax(p))
    assert grid[k] == pytest.approx(w_star, abs=2 * (grid[1] - grid[0]))
    assert wind_power(v, w_star, TP, CP) >= p.max() * (1 - 1e-12)
    assert p.max() == pytest.approx(opt_power(w_star, TP), rel=1e-9)


@given(st.one_of(st.just(0.0), st.floats(1e-6, 200.0)))
def test_opt_power_equals_wind_power_on_optimal_line(w):
    if w == 0.0:
        assert opt_power(0.0, TP) == 0.0
        return
    v = w / TP.k_omega
    assert opt_power(w, TP) == pytest.approx(wind_power(v, w, TP, CP), rel=1e-12)


@given(st.floats(0.5, 20.0), st.floats(0.0, 14.0), st.sampled_from([2.0, 3.0, 10.0]))
def test_cubic_scaling_at_fixed_lambda(v, lam, k):
    w = lam * v / TP.blade_radius
    p1 = wind_power(v, w, TP, CP)
    p2 = wind_power(k * v, k * w, TP, CP)
    assert p2 == pytest.approx(k**3 * p1, rel=1e-12, abs=1e-300)


@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_cp_nonnegative_and_continuous(a, b):
    ca, cb = cp_eval(CP, a), cp_eval(CP, b)
    assert ca >= 0 and cb >= 0
    # Lipschitz with constant 2*cp_opt/lambda_opt
    assert abs(ca - cb) <= 2 * CP.cp_opt / CP.lambda_opt * abs(a - b) + 1e-15


def test_tabulated_curve():
    table = [(0.0, 0.0), (3.0, 0.2), (7.0, 0.44), (10.0, 0.3), (13.0, 0.0)]
    c = CpCurve.from_table(table)
    assert c.lambda_opt == 7.0 and c.cp_opt == 0.44
    for lam, cp in table:
        assert cp_eval(c, lam) == cp
    assert cp_eval(c, 5.0) == pytest.approx(0.32)
    assert cp_eval(c, 14.0) == 0.0


@pytest.mark.parametrize("table", [[(0, 0), (0, 0.1)], [(0, 0.1), (5, 0.3)], [(1, 0.1)],
                                   [(0, 0), (2, -0.1)]])
def test_tabulated_curve_rejected(table):
    with pytest.raises(DomainError):
        CpCurve(kind="tabulated", table=table)
