"""Z-source impedance network: averaged model, steady state and small-signal TFs.

The network is symmetric (L1 = L2 = L, C1 = C2 = C), so one inductor current
``i_l`` and one capacitor voltage ``v_c`` describe it. Averaging over the
two switching states:

* shoot-through (fraction ``d_s``): each inductor sits across a capacitor and
  the input diode blocks;
* non-shoot-through (fraction ``d_a = 1 - d_s``): the source feeds the
  network through ``r_source`` while the bridge draws ``i_dc``.

``i_dc`` is the bridge current during the non-shoot-through interval, so the
period-averaged bridge power is ``d_a * i_dc * v_bridge``.

Two flavours of the closed-form transfer functions are offered.
``form="model"`` is the exact linearization of the averaged model above.
``form="simplified"`` uses ``V_I1 = 2V_C - V_DC - R*I_DC`` as the bridge
voltage term and ``R + r`` as the loop resistance, which ignores how the
source drop ``R*(2i_l - i_dc)`` is gated by the duty. The two agree for a
lossless network; the simplified ``i_l/d_s`` also needs zero load.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal

from .errors import DomainError, PreconditionError, SingularityError
from .tf import RationalTF, freq_response, response_mismatch

__all__ = [
    "ZNetworkParams", "ZNetworkState", "OperatingPoint", "LinearModel",
    "averaged_derivatives", "steady_state", "make_operating_point",
    "tf_vc_ds", "tf_il_ds", "tf_vc_ilref", "vc_ds_zero",
    "linearize", "linearize_inner_loop", "freq_response", "compare_forms",
]

FORMS = ("model", "simplified")


@dataclass(frozen=True)
class ZNetworkParams:
    l_z: float = 1e-3         # H per inductor
    c_z: float = 470e-6       # F per capacitor
    r_ind: float = 0.15       # ohm, inductor series resistance
    r_source: float = 0.2     # ohm, source-side series resistance

    def __post_init__(self):
        if self.l_z <= 0 or self.c_z <= 0:
            raise DomainError("l_z and c_z must be positive")
        if self.r_ind < 0 or self.r_source < 0:
            raise DomainError("resistances must be non-negative")

    @property
    def lossless(self) -> bool:
        return self.r_ind == 0.0 and self.r_source == 0.0


@dataclass(frozen=True)
class ZNetworkState:
    i_l: float
    v_c: float


@dataclass(frozen=True)
class OperatingPoint:
    v_c: float
    i_l: float
    v_dc: float
    i_dc: float
    d_s: float
    d_a: float
    v_i1: float   # 2*V_C - V_DC - R*I_DC
    i_i1: float   # 2*I_L - I_DC

    @property
    def d_diff(self) -> float:
        return self.d_a - self.d_s


def _check_duty(d_s: float) -> None:
    if d_s < 0:
        raise DomainError(f"shoot-through duty must be non-negative, got {d_s}")
    if 1.0 - 2.0 * d_s <= 0:
        raise SingularityError(f"shoot-through duty {d_s} at or beyond the 0.5 boost singularity")


def averaged_derivatives(state: ZNetworkState, d_s: float, v_dc: float, i_dc: float,
                         params: ZNetworkParams) -> tuple[float, float, float]:
    """Return ``(dil_dt, dvc_dt, i_source)``."""
    _check_duty(d_s)
    return _rhs(state.i_l, state.v_c, d_s, v_dc, i_dc, params)


def _rhs(i_l: float, v_c: float, d_s: float, v_dc: float, i_dc: float,
         params: ZNetworkParams) -> tuple[float, float, float]:
    # unchecked model equations, smooth in d_s across 0 for finite differences
    d_a = 1.0 - d_s
    i_in = 2.0 * i_l - i_dc
    v_l = d_s * v_c + d_a * (v_dc - params.r_source * i_in - v_c) - params.r_ind * i_l
    i_c = (d_a - d_s) * i_l - d_a * i_dc
    return v_l / params.l_z, i_c / params.c_z, d_a * i_in


def make_operating_point(v_c: float, i_l: float, v_dc: float, i_dc: float, d_s: float,
                         params: ZNetworkParams) -> OperatingPoint:
    return OperatingPoint(
        v_c=v_c, i_l=i_l, v_dc=v_dc, i_dc=i_dc, d_s=d_s, d_a=1.0 - d_s,
        v_i1=2.0 * v_c - v_dc - params.r_source * i_dc,
        i_i1=2.0 * i_l - i_dc,
    )


def steady_state(d_s: float, v_dc: float, i_dc: float, params: ZNetworkParams) -> OperatingPoint:
    """Unique equilibrium of :func:`averaged_derivatives` for fixed inputs."""
    _check_duty(d_s)
    d_a = 1.0 - d_s
    dd = d_a - d_s
    i_l = d_a * i_dc / dd
    v_c = (d_a * (v_dc - params.r_source * (2.0 * i_l - i_dc)) - params.r_ind * i_l) / dd
    return make_operating_point(v_c, i_l, v_dc, i_dc, d_s, params)


# closed forms -------------------------------------------------------------

def _coefficients(op: OperatingPoint, params: ZNetworkParams, form: str) -> tuple[float, float]:
    """Bridge-voltage term and loop resistance used by the closed forms."""
    if form == "model":
        # d(L di/dt)/d(d_s) and -d(L di/dt)/d(i_l) of the averaged model
        w = 2.0 * op.v_c - op.v_dc + params.r_source * op.i_i1
        r_loop = 2.0 * op.d_a * params.r_source + params.r_ind
    elif form == "simplified":
        w = op.v_i1
        r_loop = params.r_source + params.r_ind
    else:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    return w, r_loop


def _char_poly(op, params, r_loop) -> tuple[float, float, float]:
    L, C = params.l_z, params.c_z
    return (op.d_diff**2, r_loop * C, L * C)


def tf_vc_ds(op: OperatingPoint, params: ZNetworkParams, form: str = "model") -> RationalTF:
    """Small-signal capacitor voltage per unit shoot-through duty."""
    w, r_loop = _coefficients(op, params, form)
    num = (w * op.d_diff - op.i_i1 * r_loop, -params.l_z * op.i_i1)
    return RationalTF(num, _char_poly(op, params, r_loop))


def tf_il_ds(op: OperatingPoint, params: ZNetworkParams, form: str = "model") -> RationalTF:
    """Small-signal inductor current per unit shoot-through duty.

    The simplified form has no constant numerator term, so its DC gain is zero;
    the model form keeps ``(D_A - D_S) * I_I1``.
    """
    w, r_loop = _coefficients(op, params, form)
    k0 = op.d_diff * op.i_i1 if form == "model" else 0.0
    return RationalTF((k0, w * params.c_z), _char_poly(op, params, r_loop))


def tf_vc_ilref(op: OperatingPoint, params: ZNetworkParams, k_lp: float,
                form: str = "model") -> RationalTF:
    """Capacitor voltage per unit inductor-current reference with the inner
    proportional loop ``d_s = k_lp * (i_l_ref - i_l)`` closed."""
    if k_lp <= 0:
        raise DomainError("k_lp must be positive")
    w, r_loop = _coefficients(op, params, form)
    L, C = params.l_z, params.c_z
    num = (k_lp * (w * op.d_diff - op.i_i1 * r_loop), -k_lp * L * op.i_i1)
    if form == "model":
        den = (op.d_diff**2 + k_lp * op.d_diff * op.i_i1, (r_loop + k_lp * w) * C, L * C)
    else:
        den = (op.d_diff**2, (r_loop + k_lp * w * op.d_diff) * C, L * C)
    return RationalTF(num, den)


def vc_ds_zero(op: OperatingPoint, params: ZNetworkParams, form: str = "model") -> Optional[float]:
    """Real zero of :func:`tf_vc_ds`, or None for an unloaded network."""
    if op.i_i1 == 0.0:
        return None
    w, r_loop = _coefficients(op, params, form)
    return (w * op.d_diff - op.i_i1 * r_loop) / (params.l_z * op.i_i1)


# numerical linearization -------------------------------------------------

@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    tf_vc: RationalTF
    tf_il: RationalTF


def _stationarity_residual(op: OperatingPoint, params: ZNetworkParams) -> float:
    dil, dvc, _ = averaged_derivatives(ZNetworkState(op.i_l, op.v_c), op.d_s, op.v_dc, op.i_dc, params)
    # compare in volts and amps rather than V/s and A/s
    scale = max(1.0, abs(op.v_c), abs(op.v_dc), abs(op.i_l), abs(op.i_dc))
    return float(np.hypot(params.l_z * dil, params.c_z * dvc)) / scale


def _jacobians(op: OperatingPoint, params: ZNetworkParams, rel_step: float):
    x0 = np.array([op.i_l, op.v_c])

    def f(x, d):
        dil, dvc, _ = _rhs(x[0], x[1], d, op.v_dc, op.i_dc, params)
        return np.array([dil, dvc])

    A = np.empty((2, 2))
    for k in range(2):
        h = rel_step * max(1.0, abs(x0[k]))
        e = np.zeros(2)
        e[k] = h
        A[:, k] = (f(x0 + e, op.d_s) - f(x0 - e, op.d_s)) / (2.0 * h)
    h = rel_step * max(1.0, abs(op.d_s))
    B = ((f(x0, op.d_s + h) - f(x0, op.d_s - h)) / (2.0 * h)).reshape(2, 1)
    return A, B


def _ss_to_tf(A, B, C, D) -> RationalTF:
    num, den = signal.ss2tf(A, B, C, D)
    return RationalTF.from_descending(num[0], den)


def linearize(op: OperatingPoint, params: ZNetworkParams, rel_step: float = 1e-6) -> LinearModel:
    """Central finite-difference small-signal model with input ``d_s``.

    Outputs are ``i_l`` (row 0) and ``v_c`` (row 1).
    """
    if _stationarity_residual(op, params) >= 1e-9:
        raise PreconditionError("operating point is not an equilibrium of the averaged model")
    A, B = _jacobians(op, params, rel_step)
    C = np.eye(2)
    D = np.zeros((2, 1))
    return LinearModel(A, B, C, D,
                       tf_vc=_ss_to_tf(A, B, C[1:2], D[1:2]),
                       tf_il=_ss_to_tf(A, B, C[0:1], D[0:1]))


def linearize_inner_loop(op: OperatingPoint, params: ZNetworkParams, k_lp: float,
                         rel_step: float = 1e-6) -> RationalTF:
    """``v_c / i_l_ref`` from the numerical model with ``d_s = k_lp*(i_ref - i_l)``."""
    lin = linearize(op, params, rel_step)
    K = np.array([[k_lp, 0.0]])
    A_cl = lin.A - lin.B @ K
    B_cl = lin.B * k_lp
    return _ss_to_tf(A_cl, B_cl, np.array([[0.0, 1.0]]), np.zeros((1, 1)))


def compare_forms(op: OperatingPoint, params: ZNetworkParams, omega_grid,
                  k_lp: Optional[float] = None, form: str = "model") -> dict[str, tuple[float, float]]:
    """Worst magnitude/phase discrepancy between closed forms and the numerical model."""
    lin = linearize(op, params)
    out = {
        "vc_ds": response_mismatch(tf_vc_ds(op, params, form), lin.tf_vc, omega_grid),
        "il_ds": response_mismatch(tf_il_ds(op, params, form), lin.tf_il, omega_grid),
    }
    if k_lp is not None:
        out["vc_ilref"] = response_mismatch(tf_vc_ilref(op, params, k_lp, form),
                                            linearize_inner_loop(op, params, k_lp), omega_grid)
    return out
