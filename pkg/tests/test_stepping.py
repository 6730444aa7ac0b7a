import math

import numpy as np
import pytest

import leiblab as ll
from leiblab.errors import ConfigurationError, PreconditionError
from leiblab.flux import LeibensonParams, RegLevel
from leiblab.profiles import bump
from leiblab.stepping import (
    comparison_gap,
    run_doubling_legs,
    space_time_l1,
)


@pytest.fixture(scope="module")
def heat_setup():
    grid = ll.build_grid(ll.euclidean(1), 1.0, 400)
    params = LeibensonParams(2.0, 1.0)
    return grid, params


def test_heat_ground_state_decay(heat_setup):
    # Neumann(0)/Dirichlet(1) ground state cos(pi r / 2) decays at (pi/2)^2;
    # derived oracle for the boundary conditions the radial chart realizes.
    grid, params = heat_setup
    u0 = np.cos(np.pi * grid.nodes / 2.0)
    cfg = ll.TimeStepConfig(dt=1e-4, t_end=0.1)
    traj, _ = ll.run_limit(grid, u0, params, cfg, snapshot_every=200)
    expected = math.exp(-((math.pi / 2.0) ** 2) * 0.1)
    interior = slice(0, 380)
    ratio = traj.final.values[interior] / u0[interior]
    assert np.max(np.abs(ratio - expected)) / expected < 0.01


def test_constant_state_is_fixed_point(heat_setup):
    grid, params = heat_setup
    cfg = ll.TimeStepConfig(dt=1e-2, t_end=1.0)
    state = ll.StateField(np.full(len(grid.nodes), 0.7), 0.0, 0.7)
    out = ll.step_implicit(grid, state, params, None, cfg)
    assert np.array_equal(out.values, state.values)
    assert out.time == pytest.approx(1e-2)


def test_mass_accounting_identity_per_step():
    grid = ll.build_grid(ll.euclidean(1), 2.0, 200)
    params = LeibensonParams(2.0, 2.0)
    u0 = bump(grid.nodes, 0.5, 1.2, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.05, newton_tol=1e-12)
    _, rep = ll.run_limit(grid, u0, params, cfg)
    assert rep.mass_max_error <= 1e-10


def test_zero_data_regularized_run_is_constant_floor():
    grid = ll.build_grid(ll.euclidean(1), 1.0, 64)
    params = LeibensonParams(2.0, 2.0)
    reg = RegLevel(100.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.02)
    traj, rep = ll.run_regularized(grid, np.zeros(65), params, reg, cfg)
    assert np.allclose(traj.values, 0.01, atol=1e-15)
    assert rep.barrier_ok(1e-12)


def test_barriers_on_bump_data():
    # floor 1/N from below, data sup + 1/N from above, throughout the run
    grid = ll.build_grid(ll.euclidean(1), 2.0, 400)
    params = LeibensonParams(2.0, 2.0)
    reg = RegLevel(1000.0)
    u0 = bump(grid.nodes, 0.0, 0.8, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-4, t_end=0.02)
    _, rep = ll.run_regularized(grid, u0, params, reg, cfg)
    assert rep.min_value >= reg.floor - 1e-8
    assert rep.max_value <= 1.0 + reg.floor + 1e-8


def test_run_regularized_rejects_negative_data_and_small_pq():
    grid = ll.build_grid(ll.euclidean(1), 1.0, 64)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.01)
    with pytest.raises(PreconditionError):
        ll.run_regularized(grid, -np.ones(65), LeibensonParams(2.0, 2.0),
                           RegLevel(10.0), cfg)
    with pytest.raises(PreconditionError):
        ll.run_regularized(grid, np.zeros(65), LeibensonParams(2.0, 0.4),
                           RegLevel(10.0), cfg)
    # diagnostics-only runs may relax the exponent gate
    traj, _ = ll.run_regularized(grid, np.zeros(65), LeibensonParams(2.0, 0.4),
                                 RegLevel(10.0), cfg, require_pq=False)
    assert len(traj) > 1


def test_comparison_contraction_on_ordered_data():
    grid = ll.build_grid(ll.euclidean(1), 2.0, 100)
    cfg = ll.TimeStepConfig(dt=2e-3, t_end=0.1)
    rng = np.random.default_rng(11)
    for p, q in ((2.0, 2.0), (3.0, 1.0), (2.0, 0.5), (1.5, 1.5)):
        params = LeibensonParams(p, q)
        hi = bump(grid.nodes, rng.uniform(0, 1), rng.uniform(0.3, 0.8), 1.5)
        lo = hi * 0.6
        th, _ = ll.run_limit(grid, hi, params, cfg, snapshot_every=5)
        tl, _ = ll.run_limit(grid, lo, params, cfg, snapshot_every=5)
        g0, gmax = comparison_gap(grid, th, tl)
        assert gmax <= g0 + 1e-8


def test_norm_monotonicity_along_limit_run():
    grid = ll.build_grid(ll.euclidean(1), 2.0, 200)
    params = LeibensonParams(2.5, 1.2)
    u0 = bump(grid.nodes, 0.3, 0.9, 2.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.2)
    _, rep = ll.run_limit(grid, u0, params, cfg)
    for lam, inc in rep.norm_max_increase.items():
        assert inc <= 1e-8, f"norm lam={lam} increased by {inc}"


def test_energy_identity_balances():
    grid = ll.build_grid(ll.euclidean(1), 2.0, 200)
    params = LeibensonParams(2.0, 2.0)
    reg = RegLevel(100.0)
    u0 = bump(grid.nodes, 0.0, 0.8, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.1, newton_tol=1e-12)
    _, rep = ll.run_regularized(grid, u0, params, reg, cfg)
    assert rep.energy_imbalance <= 1e-6
    # the one-sided antiderivative form dissipates, never produces
    assert rep.energy_store_drop + rep.energy_dissipation <= 1e-12


def test_non_negativity_of_limit_runs():
    grid = ll.build_grid(ll.euclidean(1), 2.0, 200)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.1)
    for p, q in ((2.0, 2.0), (2.0, 0.5), (3.0, 1.0)):
        u0 = bump(grid.nodes, 0.0, 0.7, 1.0)
        _, rep = ll.run_limit(grid, u0, LeibensonParams(p, q), cfg)
        assert rep.min_value >= -1e-10


def test_snapshot_cadence_and_final_state():
    # the span divides into ceil(span/dt) equal steps, each <= dt
    grid = ll.build_grid(ll.euclidean(1), 1.0, 64)
    params = LeibensonParams(2.0, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.0105)
    traj, rep = ll.run_limit(grid, np.cos(np.pi * grid.nodes / 2), params, cfg,
                             snapshot_every=4)
    assert rep.steps == 11
    assert traj.times[0] == 0.0
    assert traj.times[-1] == pytest.approx(0.0105)
    assert np.allclose(np.diff(traj.times)[:-1], 4 * 0.0105 / 11)


def test_timestep_config_validation():
    with pytest.raises(ConfigurationError):
        ll.TimeStepConfig(dt=-1.0, t_end=1.0)
    with pytest.raises(ConfigurationError):
        ll.TimeStepConfig(dt=1e-3, t_end=1.0, newton_tol=0.5)
    with pytest.raises(ConfigurationError):
        ll.TimeStepConfig(dt=1e-3, t_end=1.0, newton_max=2)
    with pytest.raises(ConfigurationError):
        ll.TimeStepConfig(dt=1e-3, t_end=1.0, stepping="leapfrog")
    with pytest.raises(ConfigurationError):
        ll.ContinuationSchedule(n_values=(100.0, 10.0))
    with pytest.raises(ConfigurationError):
        ll.ContinuationSchedule(barrier_margin=1.5)


def test_space_time_l1_shape_guards():
    grid = ll.build_grid(ll.euclidean(1), 1.0, 32)
    params = LeibensonParams(2.0, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.01)
    a, _ = ll.run_limit(grid, np.zeros(33), params, cfg, snapshot_every=2)
    b, _ = ll.run_limit(grid, np.zeros(33), params, cfg, snapshot_every=5)
    from leiblab.errors import ContractViolation

    with pytest.raises(ContractViolation):
        space_time_l1(grid, a, b)


def test_adaptive_halving_recovers_a_stiff_step():
    # a stingy iteration cap forces subdivision; the step still lands exactly
    grid = ll.build_grid(ll.euclidean(1), 1.0, 64)
    params = LeibensonParams(3.0, 1.0)
    u0 = bump(grid.nodes, 0.0, 0.3, 3.0)
    cfg = ll.TimeStepConfig(dt=0.1, t_end=0.1, newton_max=10)
    from leiblab.stepping import _advance_dt

    u, iters, rel, halved = _advance_dt(grid, u0.copy(), 0.1, params, None, cfg)
    assert halved >= 1
    assert np.all(np.isfinite(u))
    out = ll.step_implicit(grid, ll.StateField(u0, 0.0, 0.0), params, None, cfg)
    assert out.time == pytest.approx(0.1)


def test_step_failure_contract():
    # equilibration many orders beyond the step: subdivision capped at 2^-10
    # must surface a StepFailure carrying the residual, never loop forever
    from leiblab.errors import StepFailure

    grid = ll.build_grid(ll.euclidean(1), 1.0, 64)
    params = LeibensonParams(4.0, 2.0)
    u0 = bump(grid.nodes, 0.0, 0.2, 50.0)
    state = ll.StateField(u0, 0.0, 0.0)
    fixed = ll.TimeStepConfig(dt=5.0, t_end=5.0, newton_max=6, stepping="fixed")
    with pytest.raises(StepFailure) as exc:
        ll.step_implicit(grid, state, params, None, fixed)
    assert exc.value.residual is not None
    adaptive = ll.TimeStepConfig(dt=5.0, t_end=5.0, newton_max=6)
    with pytest.raises(StepFailure):
        ll.step_implicit(grid, state, params, None, adaptive)


def test_run_doubling_legs_reaches_goal_and_monitors():
    grid = ll.build_grid(ll.euclidean(1), 2.0, 100)
    params = LeibensonParams(2.0, 2.0)
    u0 = bump(grid.nodes, 0.0, 0.5, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=1.0)
    traj, rep = run_doubling_legs(grid, u0, params, cfg, t_goal=1.0)
    assert traj.times[-1] == pytest.approx(1.0, rel=1e-9)
    assert rep.steps > 0 and rep.mass_max_error < 1e-8


def test_solver_runs_on_warped_geometry():
    # sinh-warped surface: structure monitors must hold exactly as on flat space
    grid = ll.build_grid(ll.hyperbolic_like(2), 2.0, 150)
    params = LeibensonParams(2.5, 1.2)
    u0 = bump(grid.nodes, 0.0, 0.8, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.05, newton_tol=1e-12)
    traj, rep = ll.run_limit(grid, u0, params, cfg, snapshot_every=10)
    assert rep.mass_max_error <= 1e-10
    assert max(rep.norm_max_increase.values()) <= 1e-8
    assert rep.min_value >= -1e-10


class TestContinuation:
    def test_zero_data_distances_follow_floor_gaps(self):
        grid = ll.build_grid(ll.euclidean(1), 1.0, 64)
        params = LeibensonParams(2.0, 2.0)
        cfg = ll.TimeStepConfig(dt=1e-3, t_end=0.05)
        res = ll.run_continuation(grid, np.zeros(65), params,
                                  ll.ContinuationSchedule(), cfg, snapshot_every=10)
        assert np.allclose(res.trajectory.values, 0.0, atol=1e-15)
        # runs sit at their floors, so gaps are (1/N_j - 1/N_{j+1}) |B| T
        T = res.trajectory.times[-1]
        vol = grid.total_volume
        expected = [(0.1 - 0.01) * vol * T, (0.01 - 0.001) * vol * T,
                    (0.001 - 0.0001) * vol * T]
        assert np.allclose(res.distances, expected, rtol=1e-10)
        assert res.converged and res.monotone

    def test_reference_ladder(self, continuation_reference):
        res = continuation_reference["result"]
        assert res.monotone
        assert res.converged
        assert all(b < a for a, b in zip(res.distances, res.distances[1:]))
        assert res.limit_distance <= 2.0 * res.distances[-1]

    def test_limit_agrees_with_direct_solve(self, continuation_reference):
        ref = continuation_reference
        direct, _ = ll.run_limit(ref["grid"], ref["u0"], ref["params"], ref["cfg"],
                                 snapshot_every=25)
        d = space_time_l1(ref["grid"], ref["result"].trajectory, direct)
        scale = space_time_l1(
            ref["grid"], direct,
            ll.Trajectory(direct.times, np.zeros_like(direct.values), 0.0),
        )
        assert d <= 1e-3 * scale

    def test_monotone_in_truncation_level(self, continuation_reference):
        # u_{N'} <= u_N + (1/N - 1/N') for N' > N, within 1e-6
        ref = continuation_reference
        grid, params, cfg = ref["grid"], ref["params"], ref["cfg"]
        tn, _ = ll.run_regularized(grid, ref["u0"], params, RegLevel(10.0), cfg,
                                   snapshot_every=25)
        tn2, _ = ll.run_regularized(grid, ref["u0"], params, RegLevel(100.0), cfg,
                                    snapshot_every=25)
        shift = 0.1 - 0.01
        assert np.max(tn2.values - tn.values - shift) <= 1e-6
