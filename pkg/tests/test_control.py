import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zsource_wind.control import (ControlGains, ControllerState, ac_closed_loop_tf,
                                  current_reference, dc_cascade, grid_plant_derivatives,
                                  power_stabilizer, pr_controller_tf, pr_current_controller,
                                  speed_regulator, vc_closed_loop_tf)
from zsource_wind.errors import DomainError
from zsource_wind.scenario import GridParams
from zsource_wind.simkit import rk4_step, run_current_loop
from zsource_wind.tf import bandwidth
from zsource_wind.znetwork import ZNetworkParams, steady_state

G = ControlGains()
DT = 1e-4


# speed regulator ---------------------------------------------------------------

def test_speed_regulator_examples():
    assert speed_regulator(50.0, 50.0, ControllerState(), G, DT) == 0.0
    g = ControlGains(kp_speed=100.0)
    assert speed_regulator(53.0, 50.0, ControllerState(), g, DT) == pytest.approx(300.0)


def test_speed_regulator_rises_under_persistent_error():
    st_ = ControllerState()
    g = ControlGains(p_max=2000.0)
    out = [speed_regulator(51.0, 50.0, st_, g, DT) for _ in range(200_000)]
    assert np.all(np.diff(out) >= 0)
    assert out[-1] == g.p_max


def test_speed_regulator_rejects_bad_dt():
    with pytest.raises(DomainError):
        speed_regulator(1.0, 1.0, ControllerState(), G, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-30.0, 30.0), min_size=1, max_size=300), st.floats(0.0, 3000.0))
def test_speed_antiwindup_bound(errors, p_ff):
    st_ = ControllerState()
    for e in errors:
        p = speed_regulator(50.0 + e, 50.0, st_, G, 0.01, p_ff=p_ff)
        assert 0.0 <= p <= G.p_max
        # integrator alone never maps past the output limits
        assert -1e-9 <= p_ff + G.ki_speed * st_.int_speed <= G.p_max + 1e-9


# current reference ------------------------------------------------------------

def test_current_reference_examples():
    assert current_reference(1500.0, 100.0, 0.0)[:2] == pytest.approx((10.0, 0.0))
    assert current_reference(0.0, 100.0, 30.0)[:2] == (0.0, 0.0)
    lost = current_reference(1000.0, 0.0, 0.0)
    assert lost == (0.0, 0.0, True)


@given(st.floats(0.0, 5000.0), st.floats(-400.0, 400.0), st.floats(-400.0, 400.0))
def test_current_reference_power_identity(p, va, vb):
    ref = current_reference(p, va, vb)
    if ref.grid_lost:
        assert va * va + vb * vb <= 1e-6
        return
    assert 1.5 * (va * ref.i_alpha + vb * ref.i_beta) == pytest.approx(p, rel=1e-12, abs=1e-9)


# DC cascade -----------------------------------------------------------------------

def test_dc_cascade_trivial():
    assert dc_cascade(170.0, 170.0, 0.0, ControllerState(), G, DT, m_mag=0.3) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.0, 300.0), st.floats(-50.0, 80.0), st.floats(0.0, 1.0)),
                min_size=1, max_size=200))
def test_dc_cascade_limits(samples):
    st_ = ControllerState()
    for v_c, i_l, m in samples:
        d = dc_cascade(v_c, 170.0, i_l, st_, G, DT, m_mag=m)
        assert 0.0 <= d <= min(G.d_s_max, 1.0 - m) + 1e-15


def test_dc_cascade_uses_stored_modulation():
    st_ = ControllerState(last_m=(0.9, 0.0))
    d = dc_cascade(100.0, 170.0, -100.0, st_, G, DT)
    assert d == pytest.approx(0.1)


def test_dc_cascade_closed_loop_lossless_boost():
    # averaged Z-network with a fixed bridge load, inner/outer loop closed
    zp = ZNetworkParams(r_ind=0.0, r_source=0.0)
    from zsource_wind.znetwork import averaged_derivatives, ZNetworkState
    st_ = ControllerState()
    x = [0.0, 140.0]
    v_dc, i_dc = 140.0, 5.0
    for k in range(int(1.5 / DT)):
        d = dc_cascade(x[1], 170.0, x[0], st_, G, DT, m_mag=0.3)

        def f(t, y, d=d):
            a, b, _ = averaged_derivatives(ZNetworkState(y[0], y[1]), d, v_dc, i_dc, zp)
            return [a, b]
        for j in range(2):
            x = rk4_step(f, 0.0, x, DT / 2)
    assert d == pytest.approx(0.15, abs=0.01)
    assert x[1] == pytest.approx(170.0, rel=1e-3)


# P+R ------------------------------------------------------------------------------

def test_pr_zero_input_zero_output():
    st_ = ControllerState()
    for _ in range(100):
        assert pr_current_controller(0.0, 0.0, st_, G, DT) == (0.0, 0.0)


def test_ideal_resonator_grows_without_bound():
    g = ControlGains(pr_ideal=True, kp_pr=0.0)
    st_ = ControllerState()
    w0 = g.omega_res
    n_cycle = int(round(2 * math.pi / w0 / DT))
    out = [pr_current_controller(math.cos(w0 * k * DT), 0.0, st_, g, DT)[0]
           for k in range(20 * n_cycle)]
    amp = [max(abs(v) for v in out[c * n_cycle:(c + 1) * n_cycle]) for c in range(20)]
    # linear envelope growth: equal increments per cycle
    inc = np.diff(amp[2:])
    assert amp[-1] > 15 * amp[0]
    assert np.allclose(inc, inc.mean(), rtol=0.02)


def test_damped_resonator_peak_at_grid_frequency():
    tf = pr_controller_tf(G)
    w = np.linspace(0.8 * G.omega_res, 1.2 * G.omega_res, 4001)
    mag = np.abs(tf(1j * w))
    assert w[np.argmax(mag)] == pytest.approx(G.omega_res, rel=1e-3)
    assert mag.max() == pytest.approx(G.kp_pr + G.ki_pr, rel=1e-6)


def test_discrete_resonator_gain_at_resonance():
    # steady sinusoidal response of the discrete filter equals kp + ki at w0
    st_ = ControllerState()
    w0 = G.omega_res
    n = int(2.5 / DT)   # resonator decay time constant is 1/omega_cut = 0.2 s
    out = np.array([pr_current_controller(math.cos(w0 * k * DT), 0.0, st_, G, DT)[0]
                    for k in range(n)])
    t = np.arange(n) * DT
    tail = t > 2.3
    basis = np.column_stack([np.cos(w0 * t[tail]), np.sin(w0 * t[tail])])
    c, s = np.linalg.lstsq(basis, out[tail], rcond=None)[0]
    assert math.hypot(c, s) == pytest.approx(G.kp_pr + G.ki_pr, rel=1e-3)
    assert abs(s) < 1e-3 * abs(c)


def test_current_loop_tracking():
    res = run_current_loop(G, GridParams(), 30.0)
    assert abs(res["amplitude_error"]) < 0.005
    assert abs(res["phase_error_deg"]) < 1.0


def test_current_loop_without_resonator_misses():
    # negative control: the proportional part alone leaves a visible error
    res = run_current_loop(ControlGains(ki_pr=0.0), GridParams(), 30.0)
    assert abs(res["amplitude_error"]) > 0.01 or abs(res["phase_error_deg"]) > 1.0


# grid plant -------------------------------------------------------------------------

def test_grid_plant_examples():
    assert grid_plant_derivatives(0, 0, 40, 0, 40, 0, 1e-3, 0.05) == (0.0, 0.0)
    assert grid_plant_derivatives(0, 0, 50, 0, 40, 0, 10e-3, 0.0)[0] == pytest.approx(1000.0)
    with pytest.raises(DomainError):
        grid_plant_derivatives(0, 0, 0, 0, 0, 0, 0.0, 0.0)


def test_grid_plant_phasor_relation():
    l_f, r_f, w = 1e-3, 0.05, 2 * math.pi * 50
    vg = 40.0
    i_ph = 20.0 * complex(math.cos(0.3), math.sin(0.3))
    v_inv = vg + complex(r_f, w * l_f) * i_ph

    def f(t, x):
        e = complex(math.cos(w * t), math.sin(w * t))
        va, vb = (v_inv * e).real, (v_inv * e).imag
        return list(grid_plant_derivatives(x[0], x[1], va, vb, vg * e.real, vg * e.imag, l_f, r_f))

    x = [0.0, 0.0]
    h = 2e-5
    n = int(1.0 / h)   # 50 time constants of l_f/r_f
    for k in range(n):
        x = rk4_step(f, k * h, x, h)
    e = complex(math.cos(w * n * h), math.sin(w * n * h))
    expected = i_ph * e
    assert abs(complex(x[0], x[1]) - expected) < 1e-3 * abs(i_ph)


# gains and time-scale separation ------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(kp_vc=-1), dict(d_s_max=0.5), dict(m_max=0.0), dict(m_max=1.1),
                                dict(omega_res=0.0), dict(omega_cut=0.0), dict(p_max=0.0),
                                dict(stab_cut=0.0)])
def test_gains_rejected(kw):
    with pytest.raises(DomainError):
        ControlGains(**kw)


@pytest.mark.parametrize("lossless", [True, False])
def test_time_scale_separation(lossless):
    zp = ZNetworkParams(r_ind=0.0, r_source=0.0) if lossless else ZNetworkParams()
    op = steady_state(0.15, 139.4, 14.6, zp)
    bw_ac = bandwidth(ac_closed_loop_tf(G, 1e-3, 0.05))
    bw_vc = bandwidth(vc_closed_loop_tf(op, zp, G))
    assert bw_ac >= 10 * bw_vc


def test_power_stabilizer_transparent_at_steady_state():
    st_ = ControllerState()
    for _ in range(1000):
        p = power_stabilizer(2500.0, 200.0, st_, G, DT)
    assert p == pytest.approx(2500.0, rel=1e-12)
    # a fast rise of the bridge voltage raises the command (resistive behaviour)
    assert power_stabilizer(2500.0, 210.0, st_, G, DT) > 2500.0
    off = ControlGains(stab_exponent=0.0)
    assert power_stabilizer(2500.0, 210.0, ControllerState(), off, DT) == 2500.0
