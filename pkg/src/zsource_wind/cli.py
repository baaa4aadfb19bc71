"""Command-line front end.

Subcommands::

    simulate     run a scenario, write the trace CSV and print a summary
    linearize    operating point, closed-form and numerical TF coefficients
    bode         frequency response of one small-signal TF as CSV
    mppt-sweep   one MPPT settling run per wind speed
    validate     parse and validate a scenario file

Exit codes: 0 success, 2 validation error, 3 runtime abort.

Summary statistics use a fixed settling definition: a segment (the time
between two consecutive reference or wind events) is *settled* when, over
its last 10 %, ``V_C`` stays within ``SETTLE_BAND`` of ``V_C*`` and the
speed within ``SETTLE_BAND`` of ``omega_ref``. Steady values are means over
that same window.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import __version__, simkit
from .errors import (ConstraintViolation, DomainError, PreconditionError, ScenarioError,
                     SimulationAbort)
from .modulation import ModulationCommand, carrier_cycle_intervals
from .scenario import Scenario, SystemParams, WindProfile, load, scenario_hash, truncate
from .tf import RationalTF, freq_response, response_mismatch
from .turbine_aero import speed_ref, tip_speed_ratio, wind_power
from .znetwork import (linearize, linearize_inner_loop, steady_state,
                       tf_il_ds, tf_vc_ds, tf_vc_ilref, vc_ds_zero)

log = logging.getLogger("zsource_wind")

EXIT_OK, EXIT_VALIDATION, EXIT_ABORT = 0, 2, 3
SETTLE_BAND = 0.02          # relative band for the settling test
SETTLE_FRACTION = 0.10      # trailing share of a segment used for steady values
SAMPLE_TOL = 0.01           # sampled state vs exact equilibrium, relative

_VALIDATION_ERRORS = (ScenarioError, DomainError, PreconditionError)


# helpers ------------------------------------------------------------------

def _load(args) -> Scenario:
    sc = load(args.scenario, args.set)
    changes = {}
    if getattr(args, "lossless", False):
        changes["lossless"] = True
    if getattr(args, "dt", None) is not None:
        changes["dt_physics"] = args.dt
    if changes:
        try:
            sc = dataclasses.replace(sc, **changes)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
    return sc


def _event_times(sc: Scenario) -> list[float]:
    times = {0.0, sc.duration}
    for sched in (sc.vc_ref_schedule, sc.omega_ref_schedule or ()):
        times.update(t for t, _ in sched)
    times.update(t for t, _ in sc.wind_profile.points if sc.wind_profile.kind == "steps")
    return sorted(t for t in times if 0.0 <= t <= sc.duration)


def segment_summary(trace: simkit.Trace, sc: Scenario) -> list[dict]:
    """Steady statistics over the trailing window of each event segment."""
    out = []
    t = trace["t"]
    bounds = _event_times(sc)
    for a, b in zip(bounds, bounds[1:]):
        if b <= a:
            continue
        lo = trace.at(b - SETTLE_FRACTION * (b - a))
        hi = trace.at(b)  # exclusive: the sample at b already sees the next event
        if hi <= lo:
            hi = min(lo + 1, len(t))
        win = slice(lo, hi)
        vc, vcr = trace["v_c"][win], trace["v_c_ref"][win]
        w, wr = trace["omega"][win], trace["omega_ref"][win]
        settled = bool(np.all(np.abs(vc - vcr) <= SETTLE_BAND * np.maximum(vcr, 1e-9))
                       and np.all(np.abs(w - wr) <= SETTLE_BAND * np.maximum(wr, 1e-9)))
        out.append({
            "t_start": a, "t_end": b, "settled": settled,
            "d_s": float(np.mean(trace["d_s"][win])), "v_c": float(np.mean(vc)),
            "v_c_ref": float(vcr[-1]), "v_dc": float(np.mean(trace["v_dc"][win])),
            "omega": float(np.mean(w)), "p_grid": float(np.mean(trace["p_grid"][win])),
            "m_mag": float(np.mean(trace["m_mag"][win])),
        })
    return out


def run_summary(trace: simkit.Trace, sc: Scenario) -> dict:
    params = sc.effective_params
    res, loss = simkit.energy_residual_series(trace, params)
    vcr = trace["v_c_ref"]
    vc_dev = float(np.max(np.abs(trace["v_c"] - vcr) / np.maximum(vcr, 1e-9))) if len(trace) else 0.0
    h = trace.sample_period
    e_grid = float(trace["e_grid"][-1] - trace["e_grid"][0]) if len(trace) else 0.0
    return {
        "segments": segment_summary(trace, sc),
        "vc_max_rel_dev": vc_dev,
        "energy_to_grid_j": e_grid,
        "mean_grid_power_w": e_grid / sc.duration if sc.duration > 0 else 0.0,
        "max_energy_residual_w": float(np.max(np.abs(res))) if res.size else 0.0,
        "max_residual_minus_loss_w": float(np.max(np.abs(res - loss))) if res.size else 0.0,
        "sample_period": h,
    }


def _print_summary(sc: Scenario, s: dict) -> None:
    print(f"scenario {sc.name or '(unnamed)'}  sha256={scenario_hash(sc)}  lossless={sc.lossless}")
    print(f"{'segment [s]':>16} {'settled':>7} {'d_s':>8} {'V_C':>9} {'V_C*':>7} {'v_dc':>8} "
          f"{'omega':>7} {'p_grid':>8} {'|m|':>6}")
    for g in s["segments"]:
        print(f"{g['t_start']:7.3f}-{g['t_end']:<8.3f} {str(g['settled']):>7} {g['d_s']:8.4f} "
              f"{g['v_c']:9.3f} {g['v_c_ref']:7.1f} {g['v_dc']:8.3f} {g['omega']:7.3f} "
              f"{g['p_grid']:8.1f} {g['m_mag']:6.3f}")
    print(f"max |V_C - V_C*| / V_C*   : {100 * s['vc_max_rel_dev']:.3f} %")
    print(f"energy delivered to grid  : {s['energy_to_grid_j']:.1f} J "
          f"(mean {s['mean_grid_power_w']:.1f} W)")
    print(f"max energy residual       : {s['max_energy_residual_w']:.4g} W")
    if not sc.lossless:
        print(f"max |residual - losses|   : {s['max_residual_minus_loss_w']:.4g} W")


def _write_pattern(path: str, cmd: ModulationCommand, provenance: str) -> None:
    segs = carrier_cycle_intervals(cmd)
    period = 1.0 / cmd.carrier_freq
    simkit.write_csv(path, ["state", "duration_s"],
                     [[s for s, _ in segs], [f * period for _, f in segs]], provenance)


# operating points for linearize / bode ------------------------------------

def _operating_point(args, params: SystemParams, sc: Optional[Scenario]):
    """Equilibrium from explicit (d_s, v_dc, i_dc) or from a settled scenario sample."""
    zp = params.znetwork
    if sc is None:
        return steady_state(args.d_s, args.v_dc, args.i_dc, zp), None
    t_at = args.at if args.at is not None else sc.duration
    if not 0.0 <= t_at <= sc.duration:
        raise ScenarioError(f"--at {t_at} outside [0, {sc.duration}]")
    short = truncate(sc, t_at)
    bundle = simkit.initial_bundle(short, params)
    tr = simkit.run(short, bundle) if t_at > 0 else None
    if tr is None or len(tr) == 0:
        # held modulation is only defined after the first control tick
        simkit.control_tick(bundle, short, 0.0, params)
        x, held = bundle.x, bundle.held
    else:
        x = [tr["omega"][-1], tr["v_dc"][-1], tr["i_l"][-1], tr["v_c"][-1],
             tr["i_alpha"][-1], tr["i_beta"][-1]]
        held = simkit.Held(d_s=float(tr["d_s"][-1]), m_alpha=float(tr["m_alpha"][-1]),
                           m_beta=float(tr["m_beta"][-1]))
    d_s, v_dc, i_l, v_c = held.d_s, x[1], x[2], x[3]
    i_dc = bridge_current(x, held, params)
    op = steady_state(d_s, v_dc, i_dc, zp)
    dv = abs(op.v_c - v_c) / max(abs(op.v_c), 1.0)
    di = abs(op.i_l - i_l) / max(abs(op.i_l), 1.0)
    if dv > SAMPLE_TOL or di > SAMPLE_TOL:
        raise PreconditionError(
            f"state at t={t_at} is not settled (V_C off equilibrium by {100 * dv:.2f} %, "
            f"I_L by {100 * di:.2f} %); pick a later --at inside a settled segment")
    return op, t_at


def bridge_current(x, held, params: SystemParams) -> float:
    """Averaged bridge DC current during non-shoot-through for a sampled state."""
    gp = params.grid
    i_loss = 0.0
    if gp.bridge_loss_w > 0:
        i_loss = gp.bridge_loss_w / max(2.0 * x[3] - x[1], 1e-3)
    return (0.75 * (held.m_alpha * x[4] + held.m_beta * x[5]) + i_loss) / (1.0 - held.d_s)


def _params_for_analysis(args) -> tuple[SystemParams, Optional[Scenario]]:
    if args.scenario:
        sc = _load(args)
        return sc.effective_params, sc
    if args.d_s is None or args.v_dc is None:
        raise ScenarioError("give --scenario, or --d-s and --v-dc (and optionally --i-dc)")
    params = SystemParams()
    if args.lossless:
        params = params.lossless()
    return params, None


def _coeff_rows(name: str, tf: RationalTF) -> list[tuple[str, str, int, float]]:
    rows = [(name, "num", k, c) for k, c in enumerate(tf.num)]
    rows += [(name, "den", k, c) for k, c in enumerate(tf.den)]
    return rows


# subcommands ----------------------------------------------------------------

def cmd_validate(args) -> int:
    sc = _load(args)
    if not args.quiet:
        print(f"ok: {args.scenario} (duration {sc.duration} s, sha256={scenario_hash(sc)})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = _load(args)
    tr = simkit.run(sc)
    if args.out:
        tr.to_csv(args.out)
    if args.pattern_dump:
        if len(tr):
            m_a, m_b, d = tr["m_alpha"][-1], tr["m_beta"][-1], tr["d_s"][-1]
        else:
            m_a = m_b = d = 0.0
        cmd = ModulationCommand(float(m_a), float(m_b), float(d))
        _write_pattern(args.pattern_dump, cmd, tr.provenance)
    if not args.quiet:
        _print_summary(sc, run_summary(tr, sc))
    return EXIT_OK


def cmd_linearize(args) -> int:
    params, sc = _params_for_analysis(args)
    op, t_at = _operating_point(args, params, sc)
    zp = params.znetwork
    k_lp = args.k_lp if args.k_lp is not None else params.control.k_lp
    lin = linearize(op, zp)
    inner = linearize_inner_loop(op, zp, k_lp)
    grid = np.logspace(-1, 4, 400)
    closed = {"vc_ds": tf_vc_ds(op, zp), "il_ds": tf_il_ds(op, zp), "vc_ilref": tf_vc_ilref(op, zp, k_lp)}
    numeric = {"vc_ds": lin.tf_vc, "il_ds": lin.tf_il, "vc_ilref": inner}
    if not args.quiet:
        where = f" (sampled at t={t_at} s)" if t_at is not None else ""
        print(f"operating point{where}:")
        for f in dataclasses.fields(op):
            print(f"  {f.name:5s} = {getattr(op, f.name):.9g}")
        for name in closed:
            mag, ph = response_mismatch(closed[name], numeric[name], grid)
            print(f"{name}: closed form num={_fmt_poly(closed[name].num)} den={_fmt_poly(closed[name].den)}")
            print(f"{' ' * len(name)}  numerical   num={_fmt_poly(numeric[name].num)} den={_fmt_poly(numeric[name].den)}")
            print(f"{' ' * len(name)}  max discrepancy over 0.1..1e4 rad/s: {mag:.3g} dB, {ph:.3g} deg")
        z = vc_ds_zero(op, zp)
        if z is None:
            print("vc_ds zero: none (unloaded network)")
        elif z > 0:
            print(f"vc_ds zero: +{z:.6g} rad/s (right half-plane, non-minimum phase)")
        else:
            print(f"vc_ds zero: {z:.6g} rad/s (left half-plane)")
    if args.out:
        rows = []
        for name in closed:
            rows += [("closed",) + r for r in _coeff_rows(name, closed[name])]
            rows += [("numeric",) + r for r in _coeff_rows(name, numeric[name])]
        cols = list(zip(*rows))
        simkit.write_csv(args.out, ["source", "tf", "poly", "power", "coeff"], cols,
                         _analysis_provenance(sc))
    return EXIT_OK


def _fmt_poly(c) -> str:
    return "[" + ", ".join(f"{v:.6g}" for v in c) + "]"


def _analysis_provenance(sc: Optional[Scenario]) -> str:
    tag = scenario_hash(sc) if sc is not None else "none"
    return f"scenario_sha256={tag} tool=zsource_wind {__version__}"


_TF_CHOICES = ("vc_ds", "il_ds", "vc_ilref")


def cmd_bode(args) -> int:
    params, sc = _params_for_analysis(args)
    op, _ = _operating_point(args, params, sc)
    zp = params.znetwork
    k_lp = args.k_lp if args.k_lp is not None else params.control.k_lp
    if args.source == "numeric":
        lin = linearize(op, zp)
        tf = {"vc_ds": lin.tf_vc, "il_ds": lin.tf_il}.get(args.tf) or linearize_inner_loop(op, zp, k_lp)
    else:
        tf = {"vc_ds": lambda: tf_vc_ds(op, zp, args.source), "il_ds": lambda: tf_il_ds(op, zp, args.source),
              "vc_ilref": lambda: tf_vc_ilref(op, zp, k_lp, args.source)}[args.tf]()
    if not (0 < args.w_min < args.w_max) or args.points < 2:
        raise ScenarioError("need 0 < --w-min < --w-max and --points >= 2")
    grid = np.logspace(math.log10(args.w_min), math.log10(args.w_max), args.points)
    resp = freq_response(tf, grid)
    series = [grid, [m for m, _ in resp], [p for _, p in resp]]
    if args.out:
        simkit.write_csv(args.out, ["omega_rad_s", "mag_db", "phase_deg"], series,
                         _analysis_provenance(sc))
    elif not args.quiet:
        for w, (m, p) in zip(grid, resp):
            print(f"{w:.9g},{m:.9g},{p:.9g}")
    return EXIT_OK


# MPPT sweep -------------------------------------------------------------------

SWEEP_COLUMNS = ("v_w", "omega_settled", "lambda_settled", "p_settled", "p_opt",
                 "lambda_err", "p_ratio", "settled")


def mppt_point(v_w: float, base: Scenario, duration: float, start_fraction: float = 0.9) -> dict:
    """One closed-loop MPPT run at constant wind ``v_w``.

    The shaft starts at ``start_fraction`` of the optimal speed. Settled
    values are means over the final 10 % of the run; the row counts as
    settled when speed stays within 0.5 % of its reference over that window.
    """
    tp = base.params.turbine
    sc = dataclasses.replace(
        base, duration=duration, wind_profile=WindProfile(((0.0, v_w),)),
        omega_ref_schedule=None, initial_omega=start_fraction * speed_ref(v_w, tp),
        vc_ref_schedule=tuple((0.0, v) for _, v in base.vc_ref_schedule[:1]),
        trace_every=10, name=f"mppt-{v_w:g}")
    tr = simkit.run(sc)
    win = slice(tr.at((1.0 - SETTLE_FRACTION) * duration), len(tr))
    w = tr["omega"][win]
    w_ref = speed_ref(v_w, tp)
    omega = float(np.mean(w))
    lam = tip_speed_ratio(omega, v_w, tp)
    p_set = float(np.mean(tr["p_turbine"][win]))
    p_opt = wind_power(v_w, w_ref, tp, sc.params.cp_curve)
    settled = bool(np.all(np.abs(w - w_ref) <= 0.005 * w_ref))
    return {"v_w": v_w, "omega_settled": omega, "lambda_settled": lam, "p_settled": p_set,
            "p_opt": p_opt, "lambda_err": (lam - tp.lambda_opt) / tp.lambda_opt,
            "p_ratio": p_set / p_opt if p_opt > 0 else float("nan"), "settled": settled}


def mppt_sweep(winds: Sequence[float], base: Scenario, duration: float = 3.0,
               jobs: int = 1) -> list[dict]:
    """Run :func:`mppt_point` for each wind speed; rows come back in input order."""
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(mppt_point, v, base, duration) for v in winds]
            return [f.result() for f in futs]
    return [mppt_point(v, base, duration) for v in winds]


def default_sweep_base() -> Scenario:
    return Scenario(duration=3.0, wind_profile=WindProfile(((0.0, 10.0),)),
                    vc_ref_schedule=((0.0, 170.0),), name="mppt")


def cmd_mppt_sweep(args) -> int:
    base = _load(args) if args.scenario else default_sweep_base()
    if args.lossless and not args.scenario:
        base = dataclasses.replace(base, lossless=True)
    if args.dt is not None and not args.scenario:
        base = dataclasses.replace(base, dt_physics=args.dt)
    if args.v_step <= 0 or args.v_min <= 0 or args.v_max < args.v_min:
        raise ScenarioError("need 0 < --v-min <= --v-max and --v-step > 0")
    n = int(math.floor((args.v_max - args.v_min) / args.v_step + 1e-9)) + 1
    winds = [round(args.v_min + k * args.v_step, 12) for k in range(n)]
    rows = mppt_sweep(winds, base, args.duration, args.jobs)
    for r in rows:
        if not r["settled"]:
            log.warning("wind %.3g m/s did not settle within %.3g s", r["v_w"], args.duration)
    if args.out:
        series = [[r[c] for r in rows] for c in SWEEP_COLUMNS]
        simkit.write_csv(args.out, list(SWEEP_COLUMNS), series, _analysis_provenance(base))
    if not args.quiet:
        print(",".join(SWEEP_COLUMNS))
        for r in rows:
            print(",".join(simkit._fmt(r[c]) for c in SWEEP_COLUMNS))
    return EXIT_OK


# argument parsing -------------------------------------------------------------

def _common(p: argparse.ArgumentParser, scenario_required: bool) -> None:
    p.add_argument("--scenario", required=scenario_required,
                   help="scenario JSON file, or the name of a bundled one (fig7.json, fig8.json)")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-key override, e.g. params.control.k_lp=0.02 (repeatable)")
    p.add_argument("--lossless", action="store_true", help="remove converter, filter and friction losses")
    p.add_argument("--dt", type=float, help="physics step in seconds")
    p.add_argument("--quiet", action="store_true")


def _op_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--at", type=float, help="scenario time to sample the operating point (default: end)")
    p.add_argument("--d-s", type=float, help="shoot-through duty of an explicit operating point")
    p.add_argument("--v-dc", type=float, help="DC-link voltage of an explicit operating point")
    p.add_argument("--i-dc", type=float, default=0.0, help="bridge DC current of an explicit operating point")
    p.add_argument("--k-lp", type=float, help="inner-loop gain (default: from the gains)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zsource-wind", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario")
    _common(p, True)
    p.add_argument("--pattern-dump", metavar="PATH",
                   help="debug: write the final carrier-cycle switching pattern as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("linearize", help="small-signal model at an operating point")
    _common(p, False)
    _op_args(p)
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("bode", help="frequency response CSV")
    _common(p, False)
    _op_args(p)
    p.add_argument("--tf", choices=_TF_CHOICES, default="vc_ds")
    p.add_argument("--source", choices=("model", "simplified", "numeric"), default="model",
                   help="closed form variant or the numerical linearization")
    p.add_argument("--w-min", type=float, default=0.1)
    p.add_argument("--w-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_bode)

    p = sub.add_parser("mppt-sweep", help="MPPT settling runs over a wind range")
    _common(p, False)
    p.add_argument("--v-min", type=float, default=6.0)
    p.add_argument("--v-max", type=float, default=12.0)
    p.add_argument("--v-step", type=float, default=1.0)
    p.add_argument("--duration", type=float, default=3.0, help="seconds per run")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_mppt_sweep)

    p = sub.add_parser("validate", help="parse and validate a scenario")
    _common(p, True)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except SimulationAbort as exc:
        print(f"error: simulation aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ConstraintViolation as exc:
        print(f"error: constraint violated during run: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
