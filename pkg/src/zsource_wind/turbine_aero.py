"""Wind-turbine aerodynamics and the MPPT speed reference.

Default numbers (rho=1.225, R=1.5 m, lambda_opt=7, Cp_opt=0.45) are
configuration defaults for a small direct-drive machine, not measured data.
Pitch angle is fixed; there is no pitch input.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError

BETZ_LIMIT = 16.0 / 27.0


@dataclass(frozen=True)
class TurbineParams:
    """Aerodynamic constants.

    Parameters
    ----------
    rho : float
        Air density (kg/m^3).
    blade_radius : float
        Blade radius R (m).
    swept_area : float
        Swept area A (m^2); ``pi * R**2`` when built with :meth:`from_radius`.
    lambda_opt : float
        Optimal tip-speed ratio.
    cp_opt : float
        Power coefficient at ``lambda_opt``.
    """

    rho: float = 1.225
    blade_radius: float = 1.5
    swept_area: float = math.pi * 1.5**2
    lambda_opt: float = 7.0
    cp_opt: float = 0.45

    def __post_init__(self):
        if self.rho <= 0 or self.blade_radius <= 0 or self.swept_area <= 0:
            raise DomainError("rho, blade_radius and swept_area must be positive")
        if self.lambda_opt <= 0:
            raise DomainError("lambda_opt must be positive")
        if not 0.0 < self.cp_opt < BETZ_LIMIT:
            raise DomainError(f"cp_opt={self.cp_opt} outside (0, Betz limit)")

    @classmethod
    def from_radius(cls, blade_radius: float, **kw) -> "TurbineParams":
        return cls(blade_radius=blade_radius, swept_area=math.pi * blade_radius**2, **kw)

    @property
    def k_omega(self) -> float:
        """MPPT speed gain, (rad/s) per (m/s)."""
        return self.lambda_opt / self.blade_radius


@dataclass(frozen=True)
class CpCurve:
    """Power coefficient versus tip-speed ratio.

    ``kind="analytic-parabolic"`` uses ``cp_opt * (2u - u**2)`` with
    ``u = lambda / lambda_opt``, floored at zero. ``kind="tabulated"`` linearly
    interpolates ``table`` (pairs of lambda, Cp) and returns 0 outside it.
    """

    kind: str = "analytic-parabolic"
    lambda_opt: float = 7.0
    cp_opt: float = 0.45
    table: Optional[tuple[tuple[float, float], ...]] = field(default=None)

    def __post_init__(self):
        if self.kind == "analytic-parabolic":
            if self.lambda_opt <= 0 or not 0.0 < self.cp_opt < BETZ_LIMIT:
                raise DomainError("invalid parabolic Cp curve constants")
        elif self.kind == "tabulated":
            if not self.table or len(self.table) < 2:
                raise DomainError("tabulated Cp curve needs at least two points")
            tab = tuple((float(l), float(c)) for l, c in self.table)
            lams = [p[0] for p in tab]
            if any(b <= a for a, b in zip(lams, lams[1:])):
                raise DomainError("tabulated lambda values must be strictly increasing")
            if lams[0] < 0 or any(c < 0 for _, c in tab):
                raise DomainError("tabulated lambda and Cp must be non-negative")
            if lams[0] == 0.0 and tab[0][1] != 0.0:
                raise DomainError("Cp(0) must be 0")
            object.__setattr__(self, "table", tab)
        else:
            raise DomainError(f"unknown Cp curve kind {self.kind!r}")

    @classmethod
    def from_table(cls, table) -> "CpCurve":
        tab = tuple((float(l), float(c)) for l, c in table)
        k = max(range(len(tab)), key=lambda i: tab[i][1])
        return cls(kind="tabulated", lambda_opt=tab[k][0], cp_opt=tab[k][1], table=tab)


def tip_speed_ratio(omega_w: float, v_w: float, params: TurbineParams) -> float:
    if v_w <= 0:
        raise DomainError(f"wind speed must be positive, got {v_w}")
    if omega_w < 0:
        raise DomainError(f"shaft speed must be non-negative, got {omega_w}")
    return params.blade_radius * omega_w / v_w


def cp_eval(curve: CpCurve, lam: float) -> float:
    if lam < 0:
        raise DomainError(f"tip-speed ratio must be non-negative, got {lam}")
    if curve.kind == "analytic-parabolic":
        u = lam / curve.lambda_opt
        return max(0.0, curve.cp_opt * (2.0 * u - u * u))
    lams = [p[0] for p in curve.table]
    if lam < lams[0] or lam > lams[-1]:
        return 0.0
    return float(np.interp(lam, lams, [p[1] for p in curve.table]))


def wind_power(v_w: float, omega_w: float, params: TurbineParams, curve: CpCurve) -> float:
    """Shaft power 0.5*rho*A*V^3*Cp(lambda) in W."""
    lam = tip_speed_ratio(omega_w, v_w, params)
    return 0.5 * params.rho * params.swept_area * v_w**3 * cp_eval(curve, lam)


def turbine_torque(v_w: float, omega_w: float, params: TurbineParams, curve: CpCurve) -> float:
    """Aerodynamic shaft torque in N*m, finite at standstill."""
    if omega_w > 1e-9:
        return wind_power(v_w, omega_w, params, curve) / omega_w
    # standstill: use the slope of P(omega) at the origin
    h = 1e-6 * max(1.0, v_w / params.blade_radius)
    return wind_power(v_w, h, params, curve) / h


def opt_power(omega_w: float, params: TurbineParams) -> float:
    """Maximum extractable power at shaft speed omega_w (cubic law)."""
    if omega_w < 0:
        raise DomainError(f"shaft speed must be non-negative, got {omega_w}")
    return (0.5 * params.rho * params.swept_area * omega_w**3 * params.blade_radius**3
            * params.cp_opt / params.lambda_opt**3)


def speed_ref(v_w: float, params: TurbineParams) -> float:
    if v_w < 0:
        raise DomainError(f"wind speed must be non-negative, got {v_w}")
    return params.k_omega * v_w
