"""CSV and report emission: RFC-4180 files written atomically.

Every table has a mandatory header row, '.' decimals and, where a time
axis exists, the time column first.  Floats are serialized with repr17
so identical runs produce bit-identical files; plots are emitted as
self-contained scripts referencing the CSVs, never rendered inline.
"""

from __future__ import annotations

import csv
import os
import tempfile

import numpy as np

__all__ = [
    "fmt",
    "atomic_write_text",
    "write_csv",
    "write_trajectory_csv",
    "write_norms_csv",
    "emit_plot_script",
]


def fmt(x) -> str:
    """Shortest exact decimal form for floats; ints and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def atomic_write_text(path, text: str):
    """Write via temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(x) for x in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory_csv(path, traj, grid):
    """Wide snapshot table: time first, then one column per node radius."""
    header = ["time"] + [f"u_r{fmt(float(r))}" for r in grid.nodes]
    rows = ([t] + list(v) for t, v in zip(traj.times, traj.values))
    write_csv(path, header, rows)


def write_norms_csv(path, traj, grid, lams, names):
    cols = [traj.norm_trace(grid, lam) for lam in lams]
    header = ["time"] + list(names)
    rows = ([t] + [c[i] for c in cols] for i, t in enumerate(traj.times))
    write_csv(path, header, rows)


_SUPPORT_PLOT = '''"""Support radius vs time on log-log axes, with the predicted slope."""
import csv
import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

BETA_THEORY = {beta_theory}

fig, ax = plt.subplots(figsize=(6, 4.5))
with open({csv_name!r}) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["time"]) for r in rows if float(r["time"]) > 0]
rho = [float(r["support_radius"]) for r in rows if float(r["time"]) > 0]
ax.loglog(t, rho, ".", ms=3, label="measured support")
t0, t1 = t[len(t) // 4], t[-1]
r_ref = rho[len(t) // 4]
ax.loglog([t0, t1], [r_ref, r_ref * (t1 / t0) ** (1.0 / BETA_THEORY)],
          "k--", lw=1, label=f"slope 1/{{BETA_THEORY:g}}")
ax.set_xlabel("t")
ax.set_ylabel("support radius")
ax.legend()
fig.tight_layout()
fig.savefig({png_name!r}, dpi=150)
print("wrote", {png_name!r})
'''

_DEADCORE_PLOT = '''"""Dead-core time scalings on log-log axes."""
import csv
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

groups = defaultdict(list)
with open({csv_name!r}) as fh:
    for row in csv.DictReader(fh):
        groups[row["kind"]].append((float(row["value"]), float(row["t0"])))

fig, axes = plt.subplots(1, len(groups), figsize=(5.5 * len(groups), 4.2))
if len(groups) == 1:
    axes = [axes]
for ax, (kind, pts) in zip(axes, sorted(groups.items())):
    pts.sort()
    ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-")
    ax.set_xlabel(kind)
    ax.set_ylabel("t0")
    ax.set_title(f"dead-core time vs {{kind}}")
fig.tight_layout()
fig.savefig({png_name!r}, dpi=150)
print("wrote", {png_name!r})
'''

_TEMPLATES = {"support": _SUPPORT_PLOT, "deadcore": _DEADCORE_PLOT}


def emit_plot_script(path, kind: str, csv_name: str, png_name: str, **extra):
    """Write a standalone matplotlib script referencing an emitted CSV."""
    text = _TEMPLATES[kind].format(csv_name=csv_name, png_name=png_name, **extra)
    atomic_write_text(path, text)
