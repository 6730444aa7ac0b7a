#!/usr/bin/env python3
"""Dead-core persistence study: how long the solution stays zero on the
half ball, swept over data amplitude (expected slope -delta) and over a
geometric rescaling of the whole configuration (expected slope p).

Usage: python scripts/deadcore_study.py [--p 2.5] [--q 1.2] [--out DIR]
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import leiblab as ll
from leiblab.profiles import annulus
from leiblab.propagation import dead_core_time
from leiblab.reporting import write_csv
from leiblab.stepping import run_doubling_legs


def one_run(params, B0, amp, cells, t_span, dt0):
    grid = ll.build_grid(ll.euclidean(1), 3.0 * B0, cells)
    u0 = annulus(grid.nodes, B0, 2.0 * B0, amp)
    cfg = ll.TimeStepConfig(dt=dt0, t_end=t_span)
    traj, _ = run_doubling_legs(grid, u0, params, cfg, t_goal=t_span,
                                snapshots_per_leg=60)
    return dead_core_time(traj, grid, B0, 1e-4 * amp)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=2.5)
    ap.add_argument("--q", type=float, default=1.2)
    ap.add_argument("--cells", type=int, default=300)
    ap.add_argument("--out", default="out/deadcore-study")
    args = ap.parse_args()

    params = ll.LeibensonParams(args.p, args.q)
    if params.delta <= 0.0:
        ap.error(f"slow regime required, delta = {params.delta:g}")

    rows = []
    for s in (1.0, 2.0, 4.0, 8.0):
        scale = s ** (-params.delta)
        t0 = one_run(params, 1.0, s, args.cells, 3.0 * scale, 2e-4 * scale)
        rows.append(("amplitude", s, t0))
        print(f"amplitude {s:4.1f}: t0 = {t0:.5f}")
    for R in (0.5, 1.0, 2.0):
        scale = R ** params.p
        t0 = one_run(params, R, 1.0, args.cells, 3.0 * scale, 2e-4 * scale)
        rows.append(("radius", R, t0))
        print(f"radius    {R:4.1f}: t0 = {t0:.5f}")

    for kind, theory in (("amplitude", -params.delta), ("radius", params.p)):
        pts = [(v, t0) for k, v, t0 in rows if k == kind]
        slope = np.polyfit(np.log([v for v, _ in pts]), np.log([t for _, t in pts]), 1)[0]
        print(f"{kind} slope: {slope:+.4f}  (theory {theory:+.4f})")
    write_csv(os.path.join(args.out, "deadcore.csv"), ["kind", "value", "t0"], rows)
    print(f"table written to {args.out}/deadcore.csv")


if __name__ == "__main__":
    main()
