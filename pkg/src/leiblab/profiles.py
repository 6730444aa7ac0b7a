"""Named initial-data profiles evaluated on grid nodes."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .oracles import BarenblattProfile, evaluate_barenblatt

__all__ = ["bump", "annulus", "barenblatt_snapshot", "tabulated_values"]


def bump(r, center: float, width: float, amplitude: float) -> np.ndarray:
    """C^1 compactly supported quartic bump on [center-width, center+width]."""
    if width <= 0.0:
        raise ConfigurationError("bump width must be positive")
    s = (np.asarray(r, dtype=float) - center) / width
    return amplitude * np.maximum(1.0 - s * s, 0.0) ** 2


def annulus(r, inner: float, outer: float, amplitude: float) -> np.ndarray:
    """Bump supported on the annulus [inner, outer]."""
    if not outer > inner >= 0.0:
        raise ConfigurationError(f"need outer > inner >= 0, got ({inner}, {outer})")
    return bump(r, 0.5 * (inner + outer), 0.5 * (outer - inner), amplitude)


def barenblatt_snapshot(r, profile: BarenblattProfile) -> np.ndarray:
    """Self-similar solution frozen at simulation time 0 (age t_offset)."""
    return evaluate_barenblatt(profile, r, 0.0)


def tabulated_values(r, path) -> np.ndarray:
    """Two-column `r u` table ('#' comments), linearly interpolated."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigurationError(f"profile table {path}: expected two columns")
    rr, uu = data[:, 0], data[:, 1]
    if np.any(np.diff(rr) <= 0.0):
        raise ConfigurationError(f"profile table {path}: radii must be increasing")
    return np.interp(np.asarray(r, dtype=float), rr, uu, left=uu[0], right=0.0)
