"""Scenario description, JSON (de)serialization and dotted-key overrides.

A scenario file is a JSON object whose keys mirror :class:`Scenario`;
``params`` holds one sub-object per parameter record. Missing optional keys
take the defaults below; unknown keys are rejected.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .control import ControlGains
from .electromech import MachineParams
from .errors import DomainError, ScenarioError
from .turbine_aero import CpCurve, TurbineParams
from .znetwork import ZNetworkParams

TRACE_COLUMNS = (
    "t", "v_w", "omega", "omega_ref", "v_dc", "v_c", "v_c_ref", "i_l", "d_s", "m_mag",
    "p_ref", "p_grid", "i_alpha", "i_beta", "v_grid_alpha", "energy_residual",
)
EXTRA_COLUMNS = (
    "i_l_ref", "m_alpha", "m_beta", "p_turbine", "p_loss",
    "e_turbine", "e_grid", "e_gen_loss", "e_loss",
)
REQUIRED_KEYS = ("duration", "wind_profile", "vc_ref_schedule")


@dataclass(frozen=True)
class GridParams:
    v_peak: float = 40.0       # V, phase peak (alpha-beta magnitude)
    freq: float = 50.0         # Hz
    l_f: float = 1e-3          # H
    r_f: float = 0.05          # ohm
    p_rated: float = 3000.0    # W, normalization for energy checks
    bridge_loss_w: float = 0.0  # W, constant bridge conduction loss hook

    def __post_init__(self):
        if self.v_peak <= 0 or self.freq <= 0 or self.l_f <= 0 or self.p_rated <= 0:
            raise DomainError("grid v_peak, freq, l_f and p_rated must be positive")
        if self.r_f < 0 or self.bridge_loss_w < 0:
            raise DomainError("r_f and bridge_loss_w must be non-negative")

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.freq


@dataclass(frozen=True)
class SystemParams:
    turbine: TurbineParams = field(default_factory=TurbineParams)
    cp_curve: CpCurve = field(default_factory=CpCurve)
    machine: MachineParams = field(default_factory=MachineParams)
    znetwork: ZNetworkParams = field(default_factory=ZNetworkParams)
    grid: GridParams = field(default_factory=GridParams)
    control: ControlGains = field(default_factory=ControlGains)

    def __post_init__(self):
        c, t = self.cp_curve, self.turbine
        if c.kind == "analytic-parabolic" and (c.lambda_opt != t.lambda_opt or c.cp_opt != t.cp_opt):
            raise ScenarioError("cp_curve lambda_opt/cp_opt must match the turbine parameters")

    def lossless(self) -> "SystemParams":
        """Copy with converter, filter and friction losses removed.

        The generator/rectifier resistance stays: it is the source impedance
        that sets the DC-link voltage, and the energy audit books it
        separately.
        """
        return dataclasses.replace(
            self,
            machine=dataclasses.replace(self.machine, b_fric=0.0),
            znetwork=dataclasses.replace(self.znetwork, r_ind=0.0, r_source=0.0),
            grid=dataclasses.replace(self.grid, r_f=0.0, bridge_loss_w=0.0),
        )


@dataclass(frozen=True)
class WindProfile:
    """``kind="steps"``: piecewise constant; ``kind="sampled"``: linear interpolation."""

    points: tuple[tuple[float, float], ...]
    kind: str = "steps"

    def __post_init__(self):
        pts = tuple((float(t), float(v)) for t, v in self.points)
        if not pts:
            raise ScenarioError("wind_profile.points must not be empty")
        if self.kind not in ("steps", "sampled"):
            raise ScenarioError(f"wind_profile.kind must be 'steps' or 'sampled', got {self.kind!r}")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise ScenarioError("wind_profile.points must be strictly time-sorted")
        if any(v <= 0 for _, v in pts):
            raise ScenarioError("wind speeds must be positive")
        object.__setattr__(self, "points", pts)

    def __call__(self, t: float) -> float:
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1]
        if self.kind == "steps":
            v = pts[0][1]
            for tk, vk in pts:
                if tk <= t:
                    v = vk
                else:
                    break
            return v
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t <= t1:
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        return pts[-1][1]


def schedule_value(schedule, t: float) -> float:
    v = schedule[0][1]
    for tk, vk in schedule:
        if tk <= t:
            v = vk
        else:
            break
    return v


@dataclass(frozen=True)
class Scenario:
    duration: float
    wind_profile: WindProfile
    vc_ref_schedule: tuple[tuple[float, float], ...]
    omega_ref_schedule: Optional[tuple[tuple[float, float], ...]] = None
    dt_physics: float = 5e-5
    dt_control: float = 1e-4
    params: SystemParams = field(default_factory=SystemParams)
    trace_columns: Optional[tuple[str, ...]] = None
    trace_every: int = 1
    seed: int = 0
    lossless: bool = False
    speed_feedforward: bool = True
    initial_omega: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise ScenarioError("duration must be a finite non-negative number")
        if self.dt_physics <= 0 or self.dt_control <= 0:
            raise ScenarioError("dt_physics and dt_control must be positive")
        if self.dt_physics > self.dt_control * (1 + 1e-12):
            raise ScenarioError("dt_physics must not exceed dt_control")
        ratio = self.dt_control / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ScenarioError("dt_control must be an integer multiple of dt_physics")
        if self.trace_every < 1:
            raise ScenarioError("trace_every must be >= 1")
        for key in ("vc_ref_schedule", "omega_ref_schedule"):
            sched = getattr(self, key)
            if sched is None:
                if key == "vc_ref_schedule":
                    raise ScenarioError("vc_ref_schedule is required")
                continue
            sched = tuple((float(t), float(v)) for t, v in sched)
            if not sched:
                raise ScenarioError(f"{key} must not be empty")
            if any(b[0] < a[0] for a, b in zip(sched, sched[1:])):
                raise ScenarioError(f"{key} must be time-sorted")
            if sched[-1][0] > self.duration:
                raise ScenarioError(f"{key} has an event at t={sched[-1][0]} beyond duration {self.duration}")
            if any(v < 0 for _, v in sched):
                raise ScenarioError(f"{key} values must be non-negative")
            object.__setattr__(self, key, sched)
        if self.trace_columns is not None:
            cols = tuple(self.trace_columns)
            unknown = [c for c in cols if c not in TRACE_COLUMNS + EXTRA_COLUMNS]
            if unknown:
                raise ScenarioError(f"unknown trace columns {unknown}")
            object.__setattr__(self, "trace_columns", cols)

    @property
    def effective_params(self) -> SystemParams:
        return self.params.lossless() if self.lossless else self.params

    @property
    def mppt(self) -> bool:
        return self.omega_ref_schedule is None


def truncate(sc: Scenario, t_end: float) -> Scenario:
    """The same scenario cut at ``t_end``, dropping later events."""
    def cut(sched):
        return None if sched is None else tuple(e for e in sched if e[0] <= t_end) or sched[:1]
    return dataclasses.replace(sc, duration=t_end, vc_ref_schedule=cut(sc.vc_ref_schedule),
                               omega_ref_schedule=cut(sc.omega_ref_schedule))


# (de)serialization -------------------------------------------------------

def _record_to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[f.name] = v
    return out


def scenario_to_dict(sc: Scenario) -> dict:
    d = {}
    for f in dataclasses.fields(sc):
        v = getattr(sc, f.name)
        if f.name == "params":
            v = {pf.name: _record_to_dict(getattr(v, pf.name)) for pf in dataclasses.fields(v)}
        elif f.name == "wind_profile":
            v = _record_to_dict(v)
        elif isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        d[f.name] = v
    return d


_PARAM_TYPES = {f.name: f.default_factory for f in dataclasses.fields(SystemParams)}


def _default_dict() -> dict:
    d = {
        "omega_ref_schedule": None, "dt_physics": 5e-5, "dt_control": 1e-4,
        "trace_columns": None, "trace_every": 1, "seed": 0, "lossless": False,
        "speed_feedforward": True, "initial_omega": None, "name": "",
    }
    d["params"] = {k: _record_to_dict(factory()) for k, factory in _PARAM_TYPES.items()}
    return d


def _merge(base: dict, new: dict, path: str = "") -> dict:
    for k, v in new.items():
        where = f"{path}{k}"
        if k not in base and where not in REQUIRED_KEYS and where != "wind_profile":
            raise ScenarioError(f"unknown key '{where}'")
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v, where + ".")
        else:
            base[k] = v
    return base


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(d: dict, overrides) -> dict:
    """Apply ``dotted.key=value`` strings in place; nonexistent keys are errors."""
    for item in overrides or ():
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = d
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node or not isinstance(node[p], dict):
                raise ScenarioError(f"override key '{key}' does not exist")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ScenarioError(f"override key '{key}' does not exist")
        node[parts[-1]] = _parse_value(text)
    return d


def _build_record(cls, d: dict, where: str):
    try:
        if cls is CpCurve and d.get("table") is not None:
            d = dict(d, table=tuple(tuple(p) for p in d["table"]))
        return cls(**d)
    except TypeError as exc:
        raise ScenarioError(f"{where}: {exc}") from None
    except DomainError as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def scenario_from_dict(raw: dict, overrides=None) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ScenarioError(f"missing required field(s): {', '.join(missing)}")
    d = _merge(_default_dict(), copy.deepcopy(raw))
    apply_overrides(d, overrides)
    params_d = d.pop("params")
    try:
        params = SystemParams(**{
            k: _build_record(type(_PARAM_TYPES[k]()), params_d[k], f"params.{k}") for k in _PARAM_TYPES
        })
        wp = d.pop("wind_profile")
        if not isinstance(wp, dict):
            raise ScenarioError("wind_profile must be an object with 'points'")
        extra = set(wp) - {"points", "kind"}
        if extra:
            raise ScenarioError(f"unknown key(s) in wind_profile: {sorted(extra)}")
        wind = WindProfile(points=tuple(tuple(p) for p in wp.get("points", ())),
                           kind=wp.get("kind", "steps"))
        for key in ("vc_ref_schedule", "omega_ref_schedule", "trace_columns"):
            if d.get(key) is not None:
                d[key] = tuple(tuple(x) if isinstance(x, list) else x for x in d[key])
        return Scenario(wind_profile=wind, params=params, **d)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from None


def dumps(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=True)


def scenario_hash(sc: Scenario) -> str:
    return hashlib.sha256(dumps(sc).encode()).hexdigest()[:16]


BUNDLED_DIR = Path(__file__).with_name("scenarios")


def resolve_path(path: str | Path) -> Path:
    """A user path, or the name of a bundled scenario such as ``fig8.json``."""
    p = Path(path)
    if p.exists():
        return p
    bundled = BUNDLED_DIR / p.name
    if bundled.exists():
        return bundled
    raise ScenarioError(f"scenario file '{path}' not found")


def load(path: str | Path, overrides=None) -> Scenario:
    p = resolve_path(path)
    text = p.read_text()
    if not text.strip():
        raise ScenarioError(f"{p}: empty scenario file")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{p}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(raw, overrides)
