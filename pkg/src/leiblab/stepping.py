"""Implicit time stepping and the truncation-level continuation pipeline.

Each step solves (u+ - u)/dt = L(u+) by damped Newton on the weighted-L2
residual with a tridiagonal linearization; when the tangent slope stalls
(typical for p < 2) the iteration retries with the secant slope, and when
that fails too the step is recursively halved (at most 10 times).

run_regularized shifts data and boundary by 1/N and reports the barrier
span of the trajectory; run_continuation walks an increasing ladder of
truncation levels, measures successive space-time L1 distances, then
switches to the degenerate limit law and checks that the limit run sits
within twice the last gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import flux as fx
from .errors import ConfigurationError, ContractViolation, PreconditionError, StepFailure
from .grid import (
    RadialGrid,
    StateField,
    apply_operator,
    discrete_norm,
    face_fluxes,
    operator_jacobian_band,
    weighted_l2,
)

__all__ = [
    "TimeStepConfig",
    "ContinuationSchedule",
    "Trajectory",
    "RunReport",
    "ContinuationResult",
    "step_implicit",
    "advance",
    "run_regularized",
    "run_limit",
    "run_continuation",
    "run_doubling_legs",
    "space_time_l1",
    "comparison_gap",
    "default_dt",
]

_MAX_HALVINGS = 10


@dataclass(frozen=True)
class TimeStepConfig:
    dt: float                       # time units
    t_end: float
    newton_tol: float = 1e-10       # relative, weighted L2
    newton_max: int = 30
    stepping: str = "adaptive-halving"  # or "fixed"

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (0.0 < self.newton_tol <= 1e-2):
            raise ConfigurationError("newton_tol must lie in (0, 1e-2]")
        if self.newton_max < 5:
            raise ConfigurationError("newton_max must be >= 5")
        if self.stepping not in ("fixed", "adaptive-halving"):
            raise ConfigurationError(f"unknown stepping mode '{self.stepping}'")


@dataclass(frozen=True)
class ContinuationSchedule:
    n_values: tuple[float, ...] = (10.0, 100.0, 1000.0, 10000.0)
    barrier_margin: float = 0.99    # fraction of (1/N, C) that must be respected

    def __post_init__(self):
        ns = tuple(float(n) for n in self.n_values)
        if any(n <= 1.0 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigurationError("n_values must be strictly increasing and > 1")
        if not (0.0 < self.barrier_margin < 1.0):
            raise ConfigurationError("barrier_margin must lie in (0, 1)")
        object.__setattr__(self, "n_values", ns)


@dataclass
class Trajectory:
    """Snapshots of one run: times (nt,) and nodal values (nt, M+1)."""

    times: np.ndarray
    values: np.ndarray
    boundary_value: float

    def __len__(self):
        return len(self.times)

    def state(self, k: int) -> StateField:
        return StateField(self.values[k].copy(), float(self.times[k]), self.boundary_value)

    @property
    def final(self) -> StateField:
        return self.state(len(self) - 1)

    def norm_trace(self, grid: RadialGrid, lam: float) -> np.ndarray:
        return np.array([discrete_norm(grid, v, lam) for v in self.values])


@dataclass
class RunReport:
    """Online monitors accumulated while a trajectory was advanced."""

    steps: int = 0
    newton_iterations: int = 0
    halvings: int = 0
    max_rel_residual: float = 0.0
    min_value: float = math.inf
    max_value: float = -math.inf
    mass_max_error: float = 0.0          # per-step |d(mass) - dt*outflux|, relative
    energy_imbalance: float = 0.0        # discrete identity defect, relative
    energy_dissipation: float = 0.0
    energy_store_drop: float = 0.0
    norm_lams: tuple = ()
    norm_max_increase: dict = field(default_factory=dict)  # lam -> relative
    # filled by run_regularized
    barrier_lower: float | None = None
    barrier_upper: float | None = None

    def barrier_ok(self, tol: float = 1e-8) -> bool:
        if self.barrier_lower is None:
            return True
        return (self.min_value >= self.barrier_lower - tol) and (
            self.max_value <= self.barrier_upper + tol
        )


@dataclass
class ContinuationResult:
    trajectory: Trajectory            # final limit-mode run
    report: RunReport
    n_values: tuple[float, ...]
    distances: list[float]            # successive space-time L1 gaps
    limit_distance: float
    regularized_reports: list[RunReport]
    converged: bool
    monotone: bool
    message: str = ""


def default_dt(grid: RadialGrid, params: fx.LeibensonParams, amplitude: float) -> float:
    """Front-resolving heuristic dt = h^{p/(p-1)} / amplitude^delta."""
    h = float(np.min(grid.spacings))
    amp = max(amplitude, 1e-12)
    return h ** (params.p / (params.p - 1.0)) / amp**params.delta


def _residual(grid, u, u_old, dt, params, reg):
    L = apply_operator(grid, u, params, reg)
    r = u - u_old - dt * L
    r[-1] = 0.0
    return r


def _solve_once(grid, u_old, dt, params, reg, cfg, slope_mode):
    """One Newton solve at fixed dt; returns (u, iters, rel_res, converged)."""
    u = u_old.copy()
    bval = u_old[-1]
    L0 = apply_operator(grid, u_old, params, reg)
    scale = weighted_l2(grid, u_old) + dt * weighted_l2(grid, L0) + 1e-300
    r = _residual(grid, u, u_old, dt, params, reg)
    rnorm = weighted_l2(grid, r)
    iters = 0
    for _ in range(cfg.newton_max):
        if rnorm <= cfg.newton_tol * scale:
            return u, iters, rnorm / scale, True
        band = operator_jacobian_band(grid, u, params, reg)
        if slope_mode == "secant":
            band = _secant_band(grid, u, params, reg)
        band = -dt * band
        band[1, :] += 1.0  # I - dt dL, Dirichlet row becomes identity
        try:
            delta = solve_banded((1, 1), band, -r)
        except np.linalg.LinAlgError:
            return u, iters, rnorm / scale, False
        step = 1.0
        improved = False
        for _ in range(12):
            u_try = u + step * delta
            u_try[-1] = bval
            r_try = _residual(grid, u_try, u_old, dt, params, reg)
            rnorm_try = weighted_l2(grid, r_try)
            if rnorm_try < rnorm or rnorm_try <= cfg.newton_tol * scale:
                u, r, rnorm = u_try, r_try, rnorm_try
                improved = True
                break
            step *= 0.5
        iters += 1
        if not improved:
            return u, iters, rnorm / scale, False
    converged = rnorm <= cfg.newton_tol * scale
    return u, iters, rnorm / scale, converged


def _secant_band(grid, u, params, reg):
    """Picard-style linearization: secant slope |w|^{p-2} instead of the
    tangent (p-1)|w|^{p-2}; more damped, helps singular diffusion p < 2."""
    blend = 1.0 / (params.p - 1.0)
    return blend * operator_jacobian_band(grid, u, params, reg)


def _advance_dt(grid, u_old, dt, params, reg, cfg, depth=0):
    """Advance by exactly dt, recursively halving on failure."""
    u, iters, rel, ok = _solve_once(grid, u_old, dt, params, reg, cfg, "tangent")
    halved = 0
    if not ok:
        u2, it2, rel2, ok = _solve_once(grid, u_old, dt, params, reg, cfg, "secant")
        iters += it2
        if ok or rel2 < rel:
            u, rel = u2, rel2
    if ok:
        return u, iters, rel, halved
    if cfg.stepping != "adaptive-halving" or depth >= _MAX_HALVINGS:
        raise StepFailure(
            f"implicit step failed at dt={dt:.3e} (relative residual {rel:.3e})",
            residual=rel,
            dt=dt,
        )
    u_mid, it_a, rel_a, h_a = _advance_dt(grid, u_old, dt / 2, params, reg, cfg, depth + 1)
    u_end, it_b, rel_b, h_b = _advance_dt(grid, u_mid, dt / 2, params, reg, cfg, depth + 1)
    return u_end, iters + it_a + it_b, max(rel_a, rel_b), 1 + h_a + h_b


def step_implicit(
    grid: RadialGrid,
    state: StateField,
    params: fx.LeibensonParams,
    reg: fx.RegLevel | None,
    cfg: TimeStepConfig,
    dt: float | None = None,
) -> StateField:
    """One implicit Euler step of size dt (default cfg.dt)."""
    if len(state.values) != grid.n_cells + 1:
        raise ContractViolation("state does not live on this grid")
    dt = cfg.dt if dt is None else dt
    u, _, _, _ = _advance_dt(grid, state.values.copy(), dt, params, reg, cfg)
    return StateField(u, state.time + dt, state.boundary_value)


def _norm_all(grid, u, lams):
    return [discrete_norm(grid, u, lam) for lam in lams]


def advance(
    grid: RadialGrid,
    state0: StateField,
    params: fx.LeibensonParams,
    reg: fx.RegLevel | None,
    cfg: TimeStepConfig,
    dts: np.ndarray | None = None,
    snapshot_every: int = 1,
    norm_lams: tuple | None = None,
) -> tuple[Trajectory, RunReport]:
    """March from state0, recording snapshots and online monitors.

    The span (cfg.t_end - t0) divides into ceil(span/dt) equal steps, each
    no longer than cfg.dt; an explicit dts array overrides that schedule.
    """
    if dts is None:
        span = cfg.t_end - state0.time
        if span <= 0.0:
            raise ConfigurationError("t_end does not exceed the initial time")
        n = max(1, int(math.ceil(span / cfg.dt - 1e-12)))
        dts = np.full(n, span / n)
    else:
        dts = np.asarray(dts, dtype=float)
    if norm_lams is None:
        norm_lams = (1.0, 2.0, params.q + 1.0, math.inf)

    bval = state0.boundary_value
    u = state0.values.copy()
    t = state0.time
    rep = RunReport(norm_lams=tuple(norm_lams))
    rep.min_value = float(np.min(u))
    rep.max_value = float(np.max(u))
    rep.norm_max_increase = {lam: 0.0 for lam in norm_lams}
    norms = _norm_all(grid, u, norm_lams)
    norm_scales = [max(x, 1e-300) for x in norms]

    times = [t]
    snaps = [u.copy()]
    V = grid.cell_volumes
    energy_lhs_sum = 0.0
    energy_diss_sum = 0.0
    g_store0 = float(np.sum(V * 0.5 * (u - bval) ** 2))

    for k, dt in enumerate(dts):
        u_new, iters, rel, halved = _advance_dt(grid, u, float(dt), params, reg, cfg)
        t += float(dt)
        rep.steps += 1
        rep.newton_iterations += iters
        rep.halvings += halved
        rep.max_rel_residual = max(rep.max_rel_residual, rel)
        rep.min_value = min(rep.min_value, float(np.min(u_new)))
        rep.max_value = max(rep.max_value, float(np.max(u_new)))

        # mass identity: sum V (u+ - u) = dt * flux through the outermost face
        F = face_fluxes(grid, u_new, params, reg)
        d_mass = float(np.sum(V * (u_new - u)))
        through = float(dt) * float(F[-1])
        # normalized by the step activity: at interior conservation both sides
        # vanish and a pointwise relative error would be meaningless
        mscale = max(float(np.sum(V * np.abs(u_new - u))), abs(through), 1e-300)
        rep.mass_max_error = max(rep.mass_max_error, abs(d_mass - through) / mscale)

        # discrete energy identity with g(s) = s - bval (exact up to solver tol)
        gu = u_new - bval
        energy_lhs_sum += float(np.sum(V * (u_new - u) * gu))
        energy_diss_sum += float(dt) * float(np.sum(F * np.diff(gu)))

        new_norms = _norm_all(grid, u_new, norm_lams)
        for lam, old, new, sc in zip(norm_lams, norms, new_norms, norm_scales):
            inc = (new - old) / sc
            if inc > rep.norm_max_increase[lam]:
                rep.norm_max_increase[lam] = inc
        norms = new_norms

        u = u_new
        if (k + 1) % snapshot_every == 0 or k == len(dts) - 1:
            times.append(t)
            snaps.append(u.copy())

    g_store1 = float(np.sum(V * 0.5 * (u - bval) ** 2))
    escale = abs(energy_diss_sum) + abs(g_store0) + 1e-300
    rep.energy_imbalance = abs(energy_lhs_sum + energy_diss_sum) / escale
    rep.energy_dissipation = energy_diss_sum
    rep.energy_store_drop = g_store1 - g_store0

    traj = Trajectory(np.array(times), np.array(snaps), bval)
    return traj, rep


def run_regularized(
    grid: RadialGrid,
    u0: np.ndarray,
    params: fx.LeibensonParams,
    reg: fx.RegLevel,
    cfg: TimeStepConfig,
    dts: np.ndarray | None = None,
    snapshot_every: int = 1,
    require_pq: bool = True,
) -> tuple[Trajectory, RunReport]:
    """Auxiliary run: data u0 + 1/N, boundary pinned at 1/N.

    The report carries the barrier span: theory demands
    1/N <= u <= ||u0||_inf + 1/N throughout; violations are recorded,
    not raised.
    """
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0.0):
        raise PreconditionError("regularized runs need non-negative data")
    if require_pq and not params.pq_ok:
        raise PreconditionError(
            f"existence pipeline requires p*q >= 1, got {params.p * params.q}"
        )
    state0 = StateField(u0 + reg.floor, 0.0, reg.floor)
    traj, rep = advance(grid, state0, params, reg, cfg, dts, snapshot_every)
    rep.barrier_lower = reg.floor
    rep.barrier_upper = float(np.max(u0)) + reg.floor
    return traj, rep


def run_limit(
    grid: RadialGrid,
    u0: np.ndarray,
    params: fx.LeibensonParams,
    cfg: TimeStepConfig,
    dts: np.ndarray | None = None,
    snapshot_every: int = 1,
) -> tuple[Trajectory, RunReport]:
    """Degenerate-law run with homogeneous Dirichlet boundary."""
    state0 = StateField(np.asarray(u0, dtype=float), 0.0, 0.0)
    return advance(grid, state0, params, None, cfg, dts, snapshot_every)


def space_time_l1(grid: RadialGrid, a: Trajectory, b: Trajectory) -> float:
    """Trapezoidal space-time L1 distance of two runs on the same snapshots."""
    if len(a) != len(b) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise ContractViolation("trajectories do not share snapshot times")
    spatial = np.abs(a.values - b.values) @ grid.cell_volumes
    return float(np.trapezoid(spatial, a.times))


def comparison_gap(
    grid: RadialGrid, upper: Trajectory, lower: Trajectory
) -> tuple[float, float]:
    """(initial, max over time) of sum V ((lower - upper)_+)^2.

    For ordered data the initial gap is 0 and the contraction property says
    the maximum must stay at solver-noise level.
    """
    if len(upper) != len(lower):
        raise ContractViolation("trajectories do not share snapshot times")
    viol = np.maximum(lower.values - upper.values, 0.0)
    per_time = (viol * viol) @ grid.cell_volumes
    return float(per_time[0]), float(np.max(per_time))


def run_doubling_legs(
    grid: RadialGrid,
    u0: np.ndarray,
    params: fx.LeibensonParams,
    cfg: TimeStepConfig,
    t_goal: float,
    dt0: float | None = None,
    support_target: float | None = None,
    support_threshold: float | None = None,
    leg_steps: int = 400,
    snapshots_per_leg: int = 16,
    boundary_value: float = 0.0,
    reg: fx.RegLevel | None = None,
) -> tuple[Trajectory, RunReport]:
    """Chain fixed-dt legs with doubling dt up to t_goal.

    Free boundaries decelerate like t^{1/beta - 1}, so a geometric dt ramp
    buys an order of magnitude over one fixed step.  Each leg is an
    ordinary fixed-dt advance; optionally the run stops early once the
    support radius passes support_target.
    """
    state = StateField(np.asarray(u0, dtype=float), 0.0, boundary_value)
    if support_threshold is None:
        support_threshold = 1e-8 * max(float(np.max(state.values)), 1e-300)
    dt = cfg.dt if dt0 is None else dt0
    times = [0.0]
    vals = [state.values.copy()]
    total = RunReport(norm_lams=(1.0, 2.0, params.q + 1.0, math.inf))
    total.min_value = float(np.min(state.values))
    total.max_value = float(np.max(state.values))
    total.norm_max_increase = {lam: 0.0 for lam in total.norm_lams}
    while state.time < t_goal * (1.0 - 1e-12):
        n = min(leg_steps, max(1, int(math.ceil((t_goal - state.time) / dt))))
        traj, rep = advance(
            grid, state, params, reg, cfg,
            dts=np.full(n, dt),
            snapshot_every=max(1, n // snapshots_per_leg),
        )
        times.extend(traj.times[1:].tolist())
        vals.extend(list(traj.values[1:]))
        state = traj.final
        total.steps += rep.steps
        total.newton_iterations += rep.newton_iterations
        total.halvings += rep.halvings
        total.max_rel_residual = max(total.max_rel_residual, rep.max_rel_residual)
        total.min_value = min(total.min_value, rep.min_value)
        total.max_value = max(total.max_value, rep.max_value)
        total.mass_max_error = max(total.mass_max_error, rep.mass_max_error)
        total.energy_imbalance = max(total.energy_imbalance, rep.energy_imbalance)
        for lam in total.norm_lams:
            total.norm_max_increase[lam] = max(
                total.norm_max_increase[lam], rep.norm_max_increase[lam]
            )
        if support_target is not None:
            above = state.values > support_threshold
            supp = float(grid.nodes[above].max()) if above.any() else 0.0
            if supp >= support_target:
                break
        dt *= 2.0
    return Trajectory(np.array(times), np.array(vals), boundary_value), total


def run_continuation(
    grid: RadialGrid,
    u0: np.ndarray,
    params: fx.LeibensonParams,
    schedule: ContinuationSchedule,
    cfg: TimeStepConfig,
    dts: np.ndarray | None = None,
    snapshot_every: int = 1,
    distance_tol: float = 0.0,
) -> ContinuationResult:
    """Walk the truncation ladder, then rerun with the degenerate law.

    Successive runs are compared in space-time L1; the ladder may stop early
    once the gap drops below distance_tol (0 keeps the full ladder).  The
    limit run must land within twice the last successive gap.
    """
    u0 = np.asarray(u0, dtype=float)
    prev: Trajectory | None = None
    distances: list[float] = []
    reg_reports: list[RunReport] = []
    used: list[float] = []
    message = ""
    for n_val in schedule.n_values:
        reg = fx.RegLevel(n_val)
        traj, rep = run_regularized(grid, u0, params, reg, cfg, dts, snapshot_every)
        reg_reports.append(rep)
        used.append(n_val)
        band = (1.0 - schedule.barrier_margin) * (rep.barrier_upper - rep.barrier_lower)
        if not rep.barrier_ok(tol=band):
            message = f"barrier violated beyond margin at N={n_val:g}"
        if prev is not None:
            distances.append(space_time_l1(grid, prev, traj))
            if distance_tol > 0.0 and distances[-1] < distance_tol:
                prev = traj
                break
        prev = traj

    limit_traj, limit_rep = run_limit(grid, u0, params, cfg, dts, snapshot_every)
    limit_distance = space_time_l1(grid, prev, limit_traj)

    monotone = all(b <= a * (1.0 + 1e-9) for a, b in zip(distances, distances[1:]))
    # a single-level schedule has no gaps; the 2x criterion is then vacuous
    converged = (not distances) or limit_distance <= 2.0 * distances[-1] + 1e-14
    if not monotone and not message:
        message = "successive-N distances are not monotone"
    if not converged and not message:
        message = "limit run exceeds twice the last successive gap"
    return ContinuationResult(
        trajectory=limit_traj,
        report=limit_rep,
        n_values=tuple(used),
        distances=distances,
        limit_distance=limit_distance,
        regularized_reports=reg_reports,
        converged=converged,
        monotone=monotone,
        message=message,
    )
