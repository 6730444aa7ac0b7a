"""Shared fixtures: the expensive reference runs are computed once per
session and reused by the unit tests and the acceptance gate."""

from __future__ import annotations

import time

import numpy as np
import pytest

import leiblab as ll
from leiblab.oracles import BarenblattProfile, sample_on_grid, support_radius
from leiblab.profiles import annulus, bump
from leiblab.stepping import run_doubling_legs


@pytest.fixture(scope="session")
def line():
    return ll.euclidean(1)


def _tracking_run(family, exponent, c, radius=4.0, cells=800, t_offset=1e-3):
    """Evolve an aged self-similar snapshot until its support nears 0.9 R,
    recording the relative L1 distance to the exact solution along the way."""
    m = ll.euclidean(1)
    grid = ll.build_grid(m, radius, cells)
    prof = BarenblattProfile(family, 1, exponent, c, t_offset)
    params = prof.params
    target = 0.9 * radius
    t_goal = (target / support_radius(prof, 0.0)) ** (
        1.0 / prof.beta_similarity
    ) * t_offset - t_offset
    cfg = ll.TimeStepConfig(dt=2e-5, t_end=t_goal)
    wall = time.time()
    traj, rep = run_doubling_legs(
        grid, sample_on_grid(prof, grid, 0.0), params, cfg,
        t_goal=t_goal, snapshots_per_leg=24,
    )
    wall = time.time() - wall
    l1_errors = []
    mass_drift = []
    mass0 = float(grid.cell_volumes @ traj.values[0])
    for k in range(len(traj)):
        t = float(traj.times[k])
        exact = sample_on_grid(prof, grid, t)
        denom = float(grid.cell_volumes @ exact)
        l1_errors.append(float(grid.cell_volumes @ np.abs(traj.values[k] - exact)) / denom)
        if support_radius(prof, t) <= 0.9 * radius:
            mass_drift.append(abs(float(grid.cell_volumes @ traj.values[k]) - mass0) / mass0)
    return {
        "grid": grid,
        "profile": prof,
        "params": params,
        "trajectory": traj,
        "report": rep,
        "l1_errors": np.array(l1_errors),
        "mass_drift": np.array(mass_drift),
        "wall_seconds": wall,
    }


@pytest.fixture(scope="session")
def pme_tracking():
    return _tracking_run("porous-medium", 2.0, 0.2)


@pytest.fixture(scope="session")
def plaplace_tracking():
    return _tracking_run("p-laplace", 3.0, 0.75)


@pytest.fixture(scope="session")
def doubly_nonlinear_runs():
    """Bump-started slow-diffusion runs for the three doubly nonlinear
    exponent pairs, each advanced until the support nears 0.9 R."""
    m = ll.euclidean(1)
    grid = ll.build_grid(m, 6.0, 600)
    u0 = bump(grid.nodes, 0.0, 0.3, 1.0)
    out = {}
    for p, q in ((2.5, 1.2), (3.0, 0.9), (2.2, 1.5)):
        params = ll.LeibensonParams(p, q)
        cfg = ll.TimeStepConfig(dt=1e-4, t_end=2000.0)
        traj, rep = run_doubling_legs(
            grid, u0, params, cfg, t_goal=2000.0,
            support_target=0.92 * grid.radius, snapshots_per_leg=12,
        )
        out[(p, q)] = {"trajectory": traj, "report": rep, "params": params}
    return {"grid": grid, "manifold": m, "runs": out}


@pytest.fixture(scope="session")
def continuation_reference(line):
    """Truncation-ladder reference: p = 2, q = 2, bump data."""
    grid = ll.build_grid(line, 2.0, 400)
    params = ll.LeibensonParams(2.0, 2.0)
    u0 = bump(grid.nodes, 0.0, 0.8, 1.0)
    cfg = ll.TimeStepConfig(dt=1e-4, t_end=0.05, newton_tol=1e-12)
    result = ll.run_continuation(grid, u0, params, ll.ContinuationSchedule(), cfg,
                                 snapshot_every=25)
    return {"grid": grid, "params": params, "u0": u0, "cfg": cfg, "result": result}


@pytest.fixture(scope="session")
def degiorgi_family(line):
    """Annular-data slow runs (p = 3, q = 1) over the amplitude ladder, each
    advanced to the same intrinsic time (horizon scaled by s^-delta)."""
    grid = ll.build_grid(line, 2.0, 400)
    params = ll.LeibensonParams(3.0, 1.0)
    runs = {}
    for s in (0.5, 1.0, 2.0, 4.0):
        u0 = annulus(grid.nodes, 1.0, 1.8, s)
        t_goal = 6.0 * s ** (-params.delta)
        cfg = ll.TimeStepConfig(dt=1e-4, t_end=t_goal)
        traj, rep = run_doubling_legs(grid, u0, params, cfg, t_goal=t_goal,
                                      snapshots_per_leg=40)
        runs[s] = traj
    return {"grid": grid, "params": params, "runs": runs, "ladder_radius": 1.0}
