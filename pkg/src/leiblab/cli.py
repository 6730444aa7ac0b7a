"""Command line surface: solve, verify, fit-rate and sweep.

Exit codes: 0 pass, 1 property failure, 2 configuration error,
3 solver failure.  All tables land in the output directory as RFC-4180
CSVs plus a TOML manifest that reloads to the identical run.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import RunConfig, dump_toml, load_config
from .degiorgi import (
    IterationSetup,
    caccioppoli_check,
    mean_value_check,
    run_iteration,
)
from .errors import ConfigurationError, DomainError, PreconditionError, StepFailure
from .flux import LeibensonParams, RegLevel
from .grid import build_grid, discrete_norm
from .profiles import annulus, bump
from .propagation import dead_core_time, fit_rate, track_support
from .reporting import (
    atomic_write_text,
    emit_plot_script,
    fmt,
    write_csv,
    write_norms_csv,
    write_trajectory_csv,
)
from .stepping import (
    comparison_gap,
    run_continuation,
    run_doubling_legs,
    run_limit,
    run_regularized,
)

_THRESHOLDS = {
    "comparison": 1e-8,
    "norm-monotonicity": 1e-8,
    "energy-identity": 1e-6,
    "mass-accounting": 1e-10,
    "barrier-lower": 1e-8,
    "barrier-upper": 1e-8,
    "caccioppoli": 1e3,       # cap on the fitted budget constant
    "level-decay": 1.0,       # geometric ratio must stay below this
    "mean-value": 0.5,        # relative spread of the fitted constant
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="leiblab",
        description="numerical laboratory for doubly nonlinear radial diffusion",
    )
    parser.add_argument("--version", action="version", version=f"leiblab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "continuation pipeline + degenerate-limit solve"),
        ("verify", "run the property suite and write a pass/fail table"),
        ("fit-rate", "support-rate and dead-core scaling sweeps"),
        ("sweep", "cross-product parameter sweep of limit runs"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to the TOML run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--snapshot-every", type=int, default=None,
            help="steps between stored snapshots (overrides config)",
        )
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.raw["seed"] = args.seed
        if args.snapshot_every is not None:
            cfg.raw["time"]["snapshot_every"] = args.snapshot_every
        out_dir = args.out or cfg.get("output", "directory")
        handler = {
            "solve": cmd_solve,
            "verify": cmd_verify,
            "fit-rate": cmd_fit_rate,
            "sweep": cmd_sweep,
        }[args.command]
        return handler(cfg, out_dir, args.jobs)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        if exc.residual is not None:
            print(f"  last relative residual: {exc.residual:.3e} at dt={exc.dt:.3e}",
                  file=sys.stderr)
        return 3
    except (PreconditionError, DomainError) as exc:
        print(f"property failure: {exc}", file=sys.stderr)
        return 1


def _write_manifest(cfg: RunConfig, out_dir: str):
    text = f"# leiblab {__version__} run manifest (reloadable configuration)\n"
    text += dump_toml(cfg.raw)
    atomic_write_text(os.path.join(out_dir, "manifest.toml"), text)


def cmd_solve(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    grid = cfg.grid()
    params = cfg.params()
    u0 = cfg.initial_values(grid)
    tcfg = cfg.timestep()
    snap = cfg.get("time", "snapshot_every")
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(cfg, out_dir)

    cont_rows = []
    barrier_rows = []
    if cfg.get("continuation", "enabled"):
        if not params.pq_ok:
            raise ConfigurationError(
                f"the continuation pipeline requires p*q >= 1 "
                f"(got {params.p * params.q:g}); set continuation.enabled = false "
                "for a diagnostics-only limit run"
            )
        result = run_continuation(
            grid, u0, params, cfg.schedule(), tcfg, snapshot_every=snap
        )
        traj = result.trajectory
        for n_val, rep in zip(result.n_values, result.regularized_reports):
            barrier_rows.append(
                (n_val, rep.min_value, rep.max_value, rep.barrier_lower,
                 rep.barrier_upper, rep.barrier_ok(_THRESHOLDS["barrier-lower"]))
            )
        for i, d in enumerate(result.distances):
            cont_rows.append((result.n_values[i + 1], d))
        cont_rows.append(("limit", result.limit_distance))
        report = result.report
        if result.message:
            print(f"continuation note: {result.message}", file=sys.stderr)
    else:
        traj, report = run_limit(grid, u0, params, tcfg, snapshot_every=snap)

    write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj, grid)
    write_norms_csv(
        os.path.join(out_dir, "norms.csv"), traj, grid,
        (1.0, 2.0, params.q + 1.0, math.inf), ("l1", "l2", "lq1", "linf"),
    )
    trace = track_support(traj, grid, cfg.get("diagnostics", "support_threshold_rel")
                          * max(float(np.max(u0)), 1e-300))
    write_csv(
        os.path.join(out_dir, "support.csv"),
        ["time", "support_radius"],
        zip(trace.times, trace.support_radius),
    )
    if cont_rows:
        write_csv(os.path.join(out_dir, "continuation.csv"), ["n", "l1_distance"], cont_rows)
        write_csv(
            os.path.join(out_dir, "barriers.csv"),
            ["n", "min_u", "max_u", "lower_bound", "upper_bound", "within"],
            barrier_rows,
        )
    print(f"solve: {report.steps} steps, min u = {report.min_value:.3e}, "
          f"max u = {report.max_value:.3e}, outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# verify

def _diagnostic_run(cfg, grid, params, amplitude: float, horizon_scale: float):
    """Annular-data run for the level-set monitors (data vanish on the
    ladder ball, as the decay statements require)."""
    R_lad = cfg.ladder_radius()
    outer = min(2.0 * R_lad, 0.95 * grid.radius)
    u0 = annulus(grid.nodes, R_lad, outer, amplitude)
    tcfg = cfg.timestep()
    # level-energy quadrature wants a snapshot at least every 10 steps
    traj, rep = run_doubling_legs(
        grid, u0, params, tcfg, t_goal=tcfg.t_end * horizon_scale,
        snapshots_per_leg=40,
    )
    return u0, traj, rep


def cmd_verify(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    grid = cfg.grid()
    params = cfg.params()
    u0 = cfg.initial_values(grid)
    tcfg = cfg.timestep()
    snap = cfg.get("time", "snapshot_every")
    rng = np.random.default_rng(cfg.seed)
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(cfg, out_dir)
    rows = []

    def record(monitor, value, threshold, passed, detail=""):
        rows.append((monitor, "pass" if passed else "FAIL", value, threshold, detail))
        return passed

    # ordered-data contraction across regimes
    n_pairs = cfg.get("diagnostics", "comparison_pairs")
    regimes = [(2.0, 2.0), (2.0, 1.0), (2.0, 0.5), (3.0, 1.0), (1.5, 1.5)]
    worst_slack = 0.0
    for k in range(n_pairs):
        p_k, q_k = regimes[k % len(regimes)]
        pk = LeibensonParams(p_k, q_k)
        hi = bump(grid.nodes, rng.uniform(0.0, 0.5) * grid.radius,
                  rng.uniform(0.2, 0.5) * grid.radius, rng.uniform(0.5, 2.0))
        lo = hi * rng.uniform(0.2, 0.9)
        short = min(tcfg.t_end, 50 * tcfg.dt)
        dts = np.full(50, short / 50)
        th, _ = run_limit(grid, hi, pk, tcfg, dts=dts, snapshot_every=5)
        tl, _ = run_limit(grid, lo, pk, tcfg, dts=dts, snapshot_every=5)
        g0, gmax = comparison_gap(grid, th, tl)
        worst_slack = max(worst_slack, gmax - g0)
    ok_all = record("comparison", worst_slack, _THRESHOLDS["comparison"],
                    worst_slack <= _THRESHOLDS["comparison"],
                    f"{n_pairs} ordered pairs")

    # the configured run: norms, energy, mass
    traj, rep = run_limit(grid, u0, params, tcfg, snapshot_every=snap)
    inc = max(rep.norm_max_increase.values()) if rep.norm_max_increase else 0.0
    ok_all &= record("norm-monotonicity", inc, _THRESHOLDS["norm-monotonicity"],
                     inc <= _THRESHOLDS["norm-monotonicity"],
                     "lam in {1, 2, q+1, inf}")
    ok_all &= record("energy-identity", rep.energy_imbalance,
                     _THRESHOLDS["energy-identity"],
                     rep.energy_imbalance <= _THRESHOLDS["energy-identity"])
    ok_all &= record("mass-accounting", rep.mass_max_error,
                     _THRESHOLDS["mass-accounting"],
                     rep.mass_max_error <= _THRESHOLDS["mass-accounting"])

    # barriers on the top truncation level
    n_top = cfg.schedule().n_values[-1]
    _, reg_rep = run_regularized(
        grid, u0, params, RegLevel(n_top), tcfg, snapshot_every=snap,
        require_pq=False,
    )
    low_gap = reg_rep.barrier_lower - reg_rep.min_value
    up_gap = reg_rep.max_value - reg_rep.barrier_upper
    ok_all &= record("barrier-lower", low_gap, _THRESHOLDS["barrier-lower"],
                     low_gap <= _THRESHOLDS["barrier-lower"], f"N={n_top:g}")
    ok_all &= record("barrier-upper", up_gap, _THRESHOLDS["barrier-upper"],
                     up_gap <= _THRESHOLDS["barrier-upper"], f"N={n_top:g}")

    # level-set machinery on annular-data runs
    sigma_dg = cfg.ladder_sigma()
    base_amp = max(float(np.max(u0)), 1.0)
    setup = IterationSetup.for_params(
        params, sigma_dg, cfg.ladder_radius(), cfg.get("manifold", "dimension"),
        k_max=cfg.get("diagnostics", "ladder_k_max"),
    )
    _, diag_traj, _ = _diagnostic_run(cfg, grid, params, base_amp, 1.0)
    mv_ref = mean_value_check(diag_traj, grid, setup, params)
    c_fit = mv_ref.c_star if mv_ref.c_star > 0 else 1.0
    setup_fit = IterationSetup.for_params(
        params, sigma_dg, cfg.ladder_radius(), cfg.get("manifold", "dimension"),
        k_max=cfg.get("diagnostics", "ladder_k_max"), c_fit=c_fit,
    )
    trace = run_iteration(diag_traj, grid, setup_fit, params)
    write_csv(
        os.path.join(out_dir, "ladder.csv"),
        ["k", "r_k", "theta_k", "J_k", "bound_rhs"],
        trace.ladder_rows(),
    )
    ok_all &= record("level-decay", trace.rho, _THRESHOLDS["level-decay"],
                     trace.verdict == "geometric-decay",
                     f"sigma={sigma_dg:g}, theta={trace.theta:.3g}")

    cc = caccioppoli_check(diag_traj, grid, setup_fit, params)
    ok_all &= record("caccioppoli", cc.c2_max, _THRESHOLDS["caccioppoli"],
                     math.isfinite(cc.c2_max) and cc.c2_max <= _THRESHOLDS["caccioppoli"],
                     f"{len(cc.rows)} (levels x cutoffs)")

    c_stars = [mv_ref.c_star]
    for amp_factor in (0.5, 2.0):
        scale = amp_factor ** (-params.delta) if params.delta > 0 else 1.0
        _, tj, _ = _diagnostic_run(cfg, grid, params, base_amp * amp_factor, scale)
        c_stars.append(mean_value_check(tj, grid, setup, params).c_star)
    c_arr = np.array(c_stars)
    if np.all(c_arr == 0.0):
        spread = 0.0
    else:
        mid = 0.5 * (c_arr.max() + c_arr.min())
        spread = (c_arr.max() - c_arr.min()) / mid
    ok_all &= record("mean-value", spread, _THRESHOLDS["mean-value"],
                     spread <= _THRESHOLDS["mean-value"],
                     "fitted-constant spread over amplitudes {1/2,1,2}")

    write_csv(
        os.path.join(out_dir, "verify_report.csv"),
        ["monitor", "status", "value", "threshold", "detail"],
        rows,
    )
    for monitor, status, value, threshold, detail in rows:
        print(f"{status:4s}  {monitor:18s} value={fmt(value):<22s} "
              f"threshold={fmt(threshold):<10s} {detail}")
    if not ok_all:
        failing = ", ".join(r[0] for r in rows if r[1] == "FAIL")
        print(f"verify failed: {failing}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# fit-rate

def _rate_point(task):
    cfg, amplitude = task
    grid = cfg.grid()
    params = cfg.params()
    sigma = cfg.sigma()
    u0 = cfg.initial_values(grid) * amplitude
    tcfg = cfg.timestep()
    traj, _ = run_doubling_legs(
        grid, u0, params, tcfg, t_goal=tcfg.t_end,
        support_target=0.9 * grid.radius, snapshots_per_leg=24,
    )
    thresh = cfg.get("diagnostics", "support_threshold_rel") * float(np.max(u0))
    trace = track_support(traj, grid, thresh)
    shift = 0.0
    if cfg.get("initial", "profile") == "barenblatt":
        shift = cfg.get("initial", "t_offset") or 0.0
    fit = fit_rate(trace, params, cfg.manifold(), sigma,
                   domain_radius=grid.radius, time_shift=shift)
    return trace, fit, amplitude


def _deadcore_point(task):
    cfg, kind, value = task
    params = cfg.params()
    m = cfg.manifold()
    cells = cfg.get("domain", "cells")
    eps_rel = cfg.get("diagnostics", "deadcore_eps_rel")
    tcfg = cfg.timestep()
    if kind == "amplitude":
        B0 = cfg.ladder_radius()
        amp = value
        tscale = amp ** (-params.delta)
    else:
        B0 = value
        amp = cfg.get("initial", "amplitude")
        tscale = (B0 / cfg.ladder_radius()) ** params.p
    grid = build_grid(m, 3.0 * B0, cells, cfg.get("domain", "grading"))
    u0 = annulus(grid.nodes, B0, 2.0 * B0, amp)
    traj, _ = run_doubling_legs(
        grid, u0, params, tcfg, t_goal=tcfg.t_end * tscale,
        dt0=tcfg.dt * tscale, snapshots_per_leg=48,
    )
    t0 = dead_core_time(traj, grid, B0, eps_rel * amp)
    return kind, value, t0


def _parallel(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def cmd_fit_rate(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    params = cfg.params()
    if not params.delta > 0.0:
        raise ConfigurationError(
            f"fit-rate needs the slow regime; delta = {params.delta:g}"
        )
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(cfg, out_dir)
    n_dim = cfg.get("manifold", "dimension")
    sigma = cfg.sigma()

    amplitudes = cfg.get("sweep", "amplitudes") or [1.0]
    results = _parallel(_rate_point, [(cfg, a) for a in amplitudes], jobs)
    rate_rows = []
    for trace, fit, amplitude in results:
        rate_rows.append((params.p, params.q, n_dim, sigma, fit.beta_theory,
                          fit.beta_hat, fit.rel_err, fit.window[0], fit.window[1]))
    write_csv(
        os.path.join(out_dir, "ratefit.csv"),
        ["p", "q", "n", "sigma", "beta_theory", "beta_hat", "rel_err",
         "window_lo", "window_hi"],
        rate_rows,
    )
    trace0 = results[0][0]
    write_csv(
        os.path.join(out_dir, "support.csv"),
        ["time", "support_radius"],
        zip(trace0.times, trace0.support_radius),
    )
    emit_plot_script(
        os.path.join(out_dir, "plot_support.py"), "support",
        "support.csv", "support.png", beta_theory=results[0][1].beta_theory,
    )

    dc_rows = []
    fit_rows = []
    amp_tasks = [(cfg, "amplitude", a) for a in amplitudes]
    rad_tasks = [(cfg, "radius", r) for r in (cfg.get("sweep", "radii") or [])]
    dc_results = _parallel(_deadcore_point, amp_tasks + rad_tasks, jobs)
    for kind, value, t0 in dc_results:
        dc_rows.append((kind, value, t0))
    for kind, slope_theory in (("amplitude", -params.delta), ("radius", params.p)):
        pts = [(v, t0) for k, v, t0 in dc_rows if k == kind]
        if len(pts) >= 2:
            xs, ys = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
            slope = float(np.polyfit(xs, ys, 1)[0])
            fit_rows.append((kind, slope, slope_theory,
                             abs(slope - slope_theory) / abs(slope_theory)))
    write_csv(os.path.join(out_dir, "deadcore.csv"), ["kind", "value", "t0"], dc_rows)
    write_csv(
        os.path.join(out_dir, "deadcore_fit.csv"),
        ["kind", "slope", "slope_theory", "rel_err"],
        fit_rows,
    )
    emit_plot_script(
        os.path.join(out_dir, "plot_deadcore.py"), "deadcore",
        "deadcore.csv", "deadcore.png",
    )
    for row in rate_rows:
        print(f"rate: beta_hat={row[5]:.4f} beta_theory={row[4]:.4f} rel_err={row[6]:.4f}")
    for kind, slope, theory, rel in fit_rows:
        print(f"dead-core {kind}: slope={slope:.4f} theory={theory:.4f} rel_err={rel:.4f}")
    return 0


# ---------------------------------------------------------------------------
# sweep

def _sweep_point(task):
    cfg, p_val, q_val, amplitude = task
    grid = cfg.grid()
    params = LeibensonParams(p_val, q_val)
    u0 = cfg.initial_values(grid) * amplitude
    tcfg = cfg.timestep()
    traj, rep = run_limit(grid, u0, params, tcfg,
                          snapshot_every=cfg.get("time", "snapshot_every"))
    thresh = cfg.get("diagnostics", "support_threshold_rel") * max(float(np.max(u0)), 1e-300)
    trace = track_support(traj, grid, thresh)
    return (
        p_val, q_val, amplitude, rep.steps, rep.min_value,
        max(rep.norm_max_increase.values()), rep.mass_max_error,
        rep.energy_imbalance, trace.support_radius[-1],
        discrete_norm(grid, traj.values[-1], 1.0),
    )


def cmd_sweep(cfg: RunConfig, out_dir: str, jobs: int) -> int:
    os.makedirs(out_dir, exist_ok=True)
    _write_manifest(cfg, out_dir)
    ps = cfg.get("sweep", "p") or [cfg.get("equation", "p")]
    qs = cfg.get("sweep", "q") or [cfg.get("equation", "q")]
    amps = cfg.get("sweep", "amplitudes") or [1.0]
    tasks = [(cfg, p, q, a) for p in ps for q in qs for a in amps]
    rows = _parallel(_sweep_point, tasks, jobs)
    write_csv(
        os.path.join(out_dir, "summary.csv"),
        ["p", "q", "amplitude", "steps", "min_value", "norm_increase_max",
         "mass_max_error", "energy_imbalance", "support_end", "l1_final"],
        rows,
    )
    print(f"sweep: {len(rows)} points, summary in {out_dir}/summary.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
