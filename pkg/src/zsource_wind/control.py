"""Speed regulator, DC-side cascade and P+resonance AC current control.

All regulators are discrete: the PIs use forward-Euler integrators and the
resonant term is a Tustin biquad prewarped at the grid frequency, so the
discrete resonance sits exactly at ``omega_res``.

Power bookkeeping uses the amplitude-invariant Clarke transform,
``p = 1.5 * (v_alpha*i_alpha + v_beta*i_beta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import DomainError
from .tf import RationalTF
from .znetwork import OperatingPoint, ZNetworkParams, tf_vc_ilref


@dataclass(frozen=True)
class ControlGains:
    kp_speed: float = 150.0     # W per rad/s
    ki_speed: float = 150.0     # W per rad
    kp_vc: float = 0.02         # A/V
    ki_vc: float = 4.0          # A/(V*s)
    k_lp: float = 0.01          # duty per A
    kp_pr: float = 2.0          # V/A
    ki_pr: float = 200.0        # V/A, resonant gain
    omega_res: float = 2 * math.pi * 50
    omega_cut: float = 5.0
    pr_ideal: bool = False
    d_s_max: float = 0.45
    m_max: float = 1.0
    p_max: float = 5000.0
    stab_exponent: float = 2.0  # bridge-power stabilizer, 0 disables
    stab_cut: float = 400.0     # rad/s, stabilizer low-pass corner

    def __post_init__(self):
        gains = (self.kp_speed, self.ki_speed, self.kp_vc, self.ki_vc, self.k_lp,
                 self.kp_pr, self.ki_pr)
        if any(g < 0 for g in gains):
            raise DomainError("controller gains must be non-negative")
        if not 0.0 <= self.d_s_max <= 0.45:
            raise DomainError("d_s_max must lie in [0, 0.45]")
        if not 0.0 < self.m_max <= 1.0:
            raise DomainError("m_max must lie in (0, 1]")
        if self.omega_res <= 0 or self.omega_cut <= 0:
            raise DomainError("omega_res and omega_cut must be positive")
        if self.p_max <= 0:
            raise DomainError("p_max must be positive")
        if self.stab_exponent < 0 or self.stab_cut <= 0:
            raise DomainError("stab_exponent must be >= 0 and stab_cut > 0")


@dataclass
class ControllerState:
    int_speed: float = 0.0
    int_vc: float = 0.0
    pr_alpha: list = field(default_factory=lambda: [0.0, 0.0])
    pr_beta: list = field(default_factory=lambda: [0.0, 0.0])
    last_ds: float = 0.0
    last_m: tuple = (0.0, 0.0)
    last_i_l_ref: float = 0.0
    v_hat_lpf: float = 0.0
    grid_fault: bool = False


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def speed_regulator(omega: float, omega_ref: float, state: ControllerState, gains: ControlGains,
                    dt: float, p_ff: float = 0.0) -> float:
    """Power reference from the speed error ``omega - omega_ref``.

    ``p_ff`` is an optional feedforward added ahead of the PI (the simulator
    feeds the cubic-law power at ``omega_ref``). The integrator is frozen
    while the output is saturated in the direction of the error, and its
    contribution is clamped so it alone never maps beyond ``[0, p_max]``.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    e = omega - omega_ref
    u = p_ff + gains.kp_speed * e + gains.ki_speed * state.int_speed
    p_ref = _clamp(u, 0.0, gains.p_max)
    if not ((u > gains.p_max and e > 0) or (u < 0.0 and e < 0)):
        state.int_speed += e * dt
    if gains.ki_speed > 0:
        lo = -p_ff / gains.ki_speed
        hi = (gains.p_max - p_ff) / gains.ki_speed
        state.int_speed = _clamp(state.int_speed, min(lo, hi), max(lo, hi))
    return p_ref


def power_stabilizer(p_ref: float, v_hat: float, state: ControllerState, gains: ControlGains,
                     dt: float) -> float:
    """Scale the power command by ``(v_hat / lowpass(v_hat))**stab_exponent``.

    A tightly regulated inverter is a constant-power load on the Z-network,
    a negative resistance that destabilizes the network LC whenever the
    shoot-through loop sits on its zero-duty floor (no loss damping is left
    in a lossless network). Above ``stab_cut`` the scaled command makes the
    bridge look resistive; at steady state it returns ``p_ref`` unchanged.
    """
    if gains.stab_exponent == 0.0 or v_hat <= 0.0:
        state.v_hat_lpf = max(v_hat, 0.0)
        return p_ref
    if state.v_hat_lpf <= 0.0:
        state.v_hat_lpf = v_hat
    ratio = v_hat / state.v_hat_lpf
    a = 1.0 - math.exp(-gains.stab_cut * dt)
    state.v_hat_lpf += a * (v_hat - state.v_hat_lpf)
    return p_ref * ratio**gains.stab_exponent


class CurrentReference(NamedTuple):
    i_alpha: float
    i_beta: float
    grid_lost: bool


def current_reference(p_ref: float, v_grid_alpha: float, v_grid_beta: float,
                      eps: float = 1e-6) -> CurrentReference:
    """Unity power factor current reference delivering ``p_ref``."""
    v2 = v_grid_alpha * v_grid_alpha + v_grid_beta * v_grid_beta
    if v2 <= eps:
        return CurrentReference(0.0, 0.0, True)
    k = (2.0 / 3.0) * p_ref / v2
    return CurrentReference(k * v_grid_alpha, k * v_grid_beta, False)


def dc_cascade(v_c: float, v_c_ref: float, i_l: float, state: ControllerState,
               gains: ControlGains, dt: float, m_mag: float | None = None) -> float:
    """Shoot-through duty from the capacitor-voltage / inductor-current cascade.

    Outer PI gives ``i_l_ref``; the inner loop is ``d_s = k_lp*(i_l_ref - i_l)``
    clamped to ``[0, min(d_s_max, 1 - m_mag)]``. ``m_mag`` defaults to the
    magnitude of the last modulation signal stored in ``state``.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    if m_mag is None:
        m_mag = math.hypot(*state.last_m)
    e = v_c_ref - v_c
    i_ref = gains.kp_vc * e + gains.ki_vc * state.int_vc
    d = gains.k_lp * (i_ref - i_l)
    hi = max(0.0, min(gains.d_s_max, 1.0 - m_mag))
    d_s = _clamp(d, 0.0, hi)
    if not ((d > hi and e > 0) or (d < 0.0 and e < 0)):
        state.int_vc += e * dt
    state.last_ds = d_s
    state.last_i_l_ref = i_ref
    return d_s


def _resonant_coeffs(gains: ControlGains, dt: float) -> tuple[float, float, float, float]:
    w0 = gains.omega_res
    K = w0 / math.tan(0.5 * w0 * dt)
    wc = 0.0 if gains.pr_ideal else gains.omega_cut
    gain = 2.0 * gains.ki_pr * (1.0 if gains.pr_ideal else gains.omega_cut)
    a0 = K * K + 2.0 * wc * K + w0 * w0
    b0 = gain * K / a0
    a1 = 2.0 * (w0 * w0 - K * K) / a0
    a2 = (K * K - 2.0 * wc * K + w0 * w0) / a0
    return b0, -b0, a1, a2


def _biquad(x: float, s: list, b0: float, b2: float, a1: float, a2: float) -> float:
    # direct form II transposed, b1 == 0
    y = b0 * x + s[0]
    s[0] = -a1 * y + s[1]
    s[1] = b2 * x - a2 * y
    return y


def pr_current_controller(i_err_alpha: float, i_err_beta: float, state: ControllerState,
                          gains: ControlGains, dt: float) -> tuple[float, float]:
    """Proportional plus resonant voltage command per alpha/beta axis."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    b0, b2, a1, a2 = _resonant_coeffs(gains, dt)
    u_a = gains.kp_pr * i_err_alpha + _biquad(i_err_alpha, state.pr_alpha, b0, b2, a1, a2)
    u_b = gains.kp_pr * i_err_beta + _biquad(i_err_beta, state.pr_beta, b0, b2, a1, a2)
    return u_a, u_b


def grid_plant_derivatives(i_alpha: float, i_beta: float, v_inv_alpha: float, v_inv_beta: float,
                           v_grid_alpha: float, v_grid_beta: float, l_f: float,
                           r_f: float) -> tuple[float, float]:
    if l_f <= 0:
        raise DomainError("l_f must be positive")
    return ((v_inv_alpha - v_grid_alpha - r_f * i_alpha) / l_f,
            (v_inv_beta - v_grid_beta - r_f * i_beta) / l_f)


# continuous-time loop models for bandwidth checks ------------------------

def pr_controller_tf(gains: ControlGains) -> RationalTF:
    w0, wc = gains.omega_res, gains.omega_cut
    if gains.pr_ideal:
        res = RationalTF((0.0, 2.0 * gains.ki_pr), (w0 * w0, 0.0, 1.0))
    else:
        res = RationalTF((0.0, 2.0 * gains.ki_pr * wc), (w0 * w0, 2.0 * wc, 1.0))
    return RationalTF.constant(gains.kp_pr) + res


def ac_closed_loop_tf(gains: ControlGains, l_f: float, r_f: float) -> RationalTF:
    """Current reference to grid current with ideal grid-voltage feedforward."""
    plant = RationalTF((1.0,), (r_f, l_f))
    return (pr_controller_tf(gains) * plant).feedback()


def vc_closed_loop_tf(op: OperatingPoint, zparams: ZNetworkParams, gains: ControlGains) -> RationalTF:
    """Capacitor-voltage reference to capacitor voltage, both DC loops closed."""
    pi = RationalTF((gains.ki_vc, gains.kp_vc), (0.0, 1.0))
    return (pi * tf_vc_ilref(op, zparams, gains.k_lp)).feedback()
