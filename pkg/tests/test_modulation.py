import math

import pytest
from hypothesis import given, strategies as st

from zsource_wind.errors import ConstraintViolation, DomainError
from zsource_wind.modulation import (ModulationCommand, averaged_inverter_voltage,
                                     carrier_cycle_intervals, peak_dclink, volt_second_check)
from zsource_wind.znetwork import ZNetworkParams, steady_state


def _totals(cmd):
    out = {}
    for state, frac in carrier_cycle_intervals(cmd):
        out[state] = out.get(state, 0.0) + frac
    return out


@st.composite
def commands(draw):
    mag = draw(st.floats(0.0, 1.0))
    ang = draw(st.floats(0.0, 2 * math.pi))
    d = draw(st.floats(0.0, 1.0)) * (1.0 - mag)
    return ModulationCommand(mag * math.cos(ang), mag * math.sin(ang), d)


def test_peak_dclink_examples():
    assert peak_dclink(140, 140) == 140
    assert peak_dclink(170, 140) == 200
    v_c = steady_state(0.2, 140, 0, ZNetworkParams(r_ind=0, r_source=0)).v_c
    assert peak_dclink(v_c, 140) == pytest.approx(140 / (1 - 2 * 0.2), rel=1e-12)
    with pytest.raises(DomainError):
        peak_dclink(60, 140)


def test_averaged_voltage_examples():
    assert averaged_inverter_voltage(ModulationCommand(0.6, 0.0), 140, 140) == pytest.approx((42.0, 0.0))
    assert averaged_inverter_voltage(ModulationCommand(0.3, 0.0, 0.2), 170, 140) == pytest.approx((30.0, 0.0))
    assert averaged_inverter_voltage(ModulationCommand(0.0, 0.0), 170, 140) == (0.0, 0.0)


@pytest.mark.parametrize("m,d", [((0.8, 0.0), 0.25), ((0.8, 0.7), 0.0), ((0.0, 0.0), -0.1)])
def test_constraint_rejected(m, d):
    with pytest.raises(ConstraintViolation):
        ModulationCommand(m[0], m[1], d)


def test_constraint_surface_is_inclusive():
    ModulationCommand(0.7, 0.0, 0.3)
    with pytest.raises(ConstraintViolation):
        ModulationCommand(0.7, 0.0, 0.3 + 1e-9)


def test_carrier_examples():
    assert _totals(ModulationCommand(0.0, 0.0, 0.2)) == pytest.approx({"zero": 0.8, "shoot-through": 0.2})
    tot = _totals(ModulationCommand(0.3, 0.0, 0.2))
    assert tot["shoot-through"] == 0.2
    # sector 0, angle 0: only the first active vector, (sqrt(3)/2) m sin(60 deg) = 0.75 m
    assert tot["active-1"] == pytest.approx(0.225, rel=1e-12)
    assert "active-2" not in tot


def test_pattern_order_and_split():
    segs = carrier_cycle_intervals(ModulationCommand(0.3 * math.cos(0.4), 0.3 * math.sin(0.4), 0.2))
    assert [s for s, _ in segs] == ["zero", "shoot-through", "active-1", "active-2",
                                    "shoot-through", "zero"]
    assert segs[1][1] == segs[4][1] == 0.1


@given(commands())
def test_fractions_sum_to_one(cmd):
    segs = carrier_cycle_intervals(cmd)
    assert sum(f for _, f in segs) == pytest.approx(1.0, abs=1e-12)
    assert all(f > 0 for _, f in segs)


@given(commands())
def test_shoot_through_fraction_exact(cmd):
    assert _totals(cmd).get("shoot-through", 0.0) == pytest.approx(cmd.d_s, rel=0, abs=1e-17)


@given(commands(), st.floats(70.0, 400.0), st.floats(0.0, 300.0))
def test_volt_seconds_match(cmd, v_c, v_dc):
    v_dc = min(v_dc, 2 * v_c)
    assert volt_second_check(cmd, v_c, v_dc) < 1e-9 * peak_dclink(v_c, v_dc) + 1e-12


@pytest.mark.parametrize("m,d,v_c,v_dc", [((0.6, 0.0), 0.0, 140, 140), ((0.3, 0.0), 0.2, 170, 140)])
def test_volt_seconds_examples(m, d, v_c, v_dc):
    assert volt_second_check(ModulationCommand(m[0], m[1], d), v_c, v_dc) < 1e-9 * peak_dclink(v_c, v_dc)


@given(st.floats(0.0, 0.45), st.floats(1.0, 400.0))
def test_peak_matches_boost_law(d, v_dc):
    op = steady_state(d, v_dc, 0.0, ZNetworkParams(r_ind=0.0, r_source=0.0))
    assert peak_dclink(op.v_c, v_dc) == pytest.approx(v_dc / (1 - 2 * d), rel=1e-12)
