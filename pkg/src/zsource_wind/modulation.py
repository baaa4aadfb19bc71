"""Simple-boost PWM for the Z-source bridge.

Shoot-through only replaces zero-state time, so active volt-seconds are
untouched and ``|m| + d_s <= 1``. Voltages are in the amplitude-invariant
alpha-beta frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConstraintViolation, DomainError

_TOL = 1e-12


@dataclass(frozen=True)
class ModulationCommand:
    m_alpha: float
    m_beta: float
    d_s: float = 0.0
    carrier_freq: float = 10e3

    def __post_init__(self):
        mag = self.magnitude
        if mag > 1.0 + _TOL:
            raise ConstraintViolation(f"modulation magnitude {mag:.6g} exceeds 1")
        if self.d_s < 0:
            raise ConstraintViolation(f"negative shoot-through duty {self.d_s}")
        if self.d_s > 1.0 - mag + _TOL:
            raise ConstraintViolation(
                f"shoot-through duty {self.d_s:.6g} exceeds zero-state room {1.0 - mag:.6g}")
        if self.carrier_freq <= 0:
            raise DomainError("carrier frequency must be positive")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.m_alpha, self.m_beta)


def peak_dclink(v_c: float, v_dc: float) -> float:
    """Bridge input voltage during non-shoot-through, ``2*v_c - v_dc``."""
    if v_c < 0.5 * v_dc:
        raise DomainError(f"v_c={v_c} below v_dc/2={0.5 * v_dc}")
    return 2.0 * v_c - v_dc


def averaged_inverter_voltage(cmd: ModulationCommand, v_c: float, v_dc: float) -> tuple[float, float]:
    half = 0.5 * peak_dclink(v_c, v_dc)
    return cmd.m_alpha * half, cmd.m_beta * half


def _dwell(cmd: ModulationCommand) -> tuple[int, float, float]:
    """Sector index (0..5) and active-vector fractions for the reference."""
    mag = cmd.magnitude
    if mag == 0.0:
        return 0, 0.0, 0.0
    theta = math.atan2(cmd.m_beta, cmd.m_alpha) % (2.0 * math.pi)
    sector = min(int(theta // (math.pi / 3.0)), 5)
    phi = theta - sector * math.pi / 3.0
    k = math.sqrt(3.0) / 2.0 * mag
    return sector, k * math.sin(math.pi / 3.0 - phi), k * math.sin(phi)


def carrier_cycle_intervals(cmd: ModulationCommand) -> list[tuple[str, float]]:
    """One carrier cycle as ``(state, fraction)`` segments.

    Pattern: zero, shoot-through, active-1, active-2, shoot-through, zero,
    with shoot-through split equally between the two zero-state slots.
    Zero-length segments are dropped.
    """
    _, t1, t2 = _dwell(cmd)
    t_zero = max(0.0, 1.0 - t1 - t2 - cmd.d_s)
    half_st = 0.5 * cmd.d_s
    pattern = [
        ("zero", 0.5 * t_zero), ("shoot-through", half_st),
        ("active-1", t1), ("active-2", t2),
        ("shoot-through", half_st), ("zero", 0.5 * t_zero),
    ]
    return [(s, f) for s, f in pattern if f > 0.0]


def volt_second_check(cmd: ModulationCommand, v_c: float, v_dc: float) -> float:
    """Distance between the pattern-averaged and the averaged-model voltage."""
    v_hat = peak_dclink(v_c, v_dc)
    sector, _, _ = _dwell(cmd)
    a1 = sector * math.pi / 3.0
    a2 = a1 + math.pi / 3.0
    # active vectors have magnitude 2/3 * v_hat in the amplitude-invariant frame
    r = 2.0 / 3.0 * v_hat
    va = vb = 0.0
    for state, frac in carrier_cycle_intervals(cmd):
        if state == "active-1":
            va += frac * r * math.cos(a1)
            vb += frac * r * math.sin(a1)
        elif state == "active-2":
            va += frac * r * math.cos(a2)
            vb += frac * r * math.sin(a2)
    ea, eb = averaged_inverter_voltage(cmd, v_c, v_dc)
    return math.hypot(va - ea, vb - eb)
