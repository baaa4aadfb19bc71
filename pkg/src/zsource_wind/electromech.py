"""Averaged PMSG, diode rectifier, DC link and shaft.

The generator plus bridge rectifier is a DC Thevenin source ``k_v * omega``
behind ``r_gen`` with an ideal blocking diode. The shaft is rigid and direct
drive, so turbine speed and generator speed coincide.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class MachineParams:
    k_v: float = 3.0          # V*s/rad, rectified open-circuit EMF constant
    r_gen: float = 1.1        # ohm, lumped generator + rectifier resistance
    j_shaft: float = 0.5      # kg*m^2
    b_fric: float = 0.01      # N*m*s/rad
    c_dclink: float = 2200e-6  # F

    def __post_init__(self):
        if min(self.k_v, self.r_gen, self.j_shaft, self.c_dclink) <= 0:
            raise DomainError("k_v, r_gen, j_shaft and c_dclink must be positive")
        if self.b_fric < 0:
            raise DomainError("b_fric must be non-negative")


@dataclass(frozen=True)
class MachineState:
    omega: float
    v_dc: float


def rectifier_current(state: MachineState, params: MachineParams) -> float:
    return max(0.0, (params.k_v * state.omega - state.v_dc) / params.r_gen)


def machine_derivatives(state: MachineState, t_wind: float, i_source: float,
                        params: MachineParams) -> tuple[float, float]:
    """Return ``(domega_dt, dvdc_dt)``.

    Electromagnetic torque is ``k_v * i_rect`` (air-gap power over speed), so
    nothing divides by omega.
    """
    i_rect = rectifier_current(state, params)
    t_e = params.k_v * i_rect
    domega = (t_wind - t_e - params.b_fric * state.omega) / params.j_shaft
    dvdc = (i_rect - i_source) / params.c_dclink
    return domega, dvdc


def loaded_link_voltage(omega: float, p_elec: float, params: MachineParams) -> float:
    """DC-link voltage at which the rectifier delivers ``p_elec`` watts.

    Solves ``v * (k_v*omega - v) / r_gen = p_elec`` on the high-voltage branch.
    """
    emf = params.k_v * omega
    disc = emf * emf - 4.0 * params.r_gen * p_elec
    if disc < 0:
        raise DomainError(f"{p_elec:.6g} W exceeds the rectifier's deliverable power at omega={omega}")
    return 0.5 * (emf + disc**0.5)
