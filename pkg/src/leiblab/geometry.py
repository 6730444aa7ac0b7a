"""Rotationally symmetric model geometries and their volume calculus.

A model geometry is fixed by an integer dimension ``n`` and a warping
profile ``psi(r) >= 0`` with ``psi(0) = 0``; the radial volume element is
``omega_{n-1} psi(r)^{n-1} dr`` where ``omega_{n-1}`` is the area of the
unit (n-1)-sphere.  Euclidean n-space is ``psi(r) = r``; ``psi = sinh r``
gives hyperbolic-like volume growth.

Ball volumes are computed by composite Gauss-Legendre quadrature with
panels split at any tabulation knots, so that volumes of tabulated
(piecewise-linear) profiles are exact and smooth profiles are integrated
to near machine precision.  Grid cell volumes elsewhere in the package
are built from the same panel integrals, keeping discrete mass sums and
ball volumes consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "ModelManifold",
    "BallMeasure",
    "GrowthFit",
    "euclidean",
    "hyperbolic_like",
    "tabulated",
    "load_warping_table",
    "unit_sphere_area",
    "volume_of_ball",
    "ball_measure",
    "shell_volumes",
    "volume_growth_exponent",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_PANEL_LENGTH = 0.5


def unit_sphere_area(n: int) -> float:
    """Area omega_{n-1} of the unit sphere in R^n (omega_0 = 2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class ModelManifold:
    """Radially symmetric model manifold around a pole.

    Immutable after construction; safe to share across workers.
    """

    dimension: int
    warping: Callable[[np.ndarray], np.ndarray]
    label: str
    knots: tuple[float, ...] | None = None  # quadrature panel breakpoints
    r_max: float = math.inf

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigurationError("manifold dimension must be >= 1")
        psi0 = float(self.warping(np.asarray(0.0)))
        if abs(psi0) > 1e-14:
            raise ConfigurationError(f"warping must vanish at the pole, psi(0)={psi0}")
        probe_hi = min(self.r_max, 10.0)
        probe = np.linspace(probe_hi * 1e-6, probe_hi, 32)
        vals = np.asarray(self.warping(probe), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
            raise ConfigurationError("warping must be finite and positive for r > 0")

    def psi(self, r):
        return np.asarray(self.warping(np.asarray(r, dtype=float)), dtype=float)

    @property
    def sphere_area(self) -> float:
        return unit_sphere_area(self.dimension)


@dataclass(frozen=True)
class BallMeasure:
    """A pole-centered ball with its measure (radial runs only)."""

    radius: float
    volume: float


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares volume growth exponent over a radius window."""

    exponent: float
    window: tuple[float, float]
    samples: int
    narrow_window: bool = False


def euclidean(n: int) -> ModelManifold:
    return ModelManifold(n, lambda r: np.asarray(r, dtype=float), "euclidean")


def hyperbolic_like(n: int) -> ModelManifold:
    return ModelManifold(n, np.sinh, "hyperbolic")


def load_warping_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column `r value` table ('#' comments, whitespace separated)."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ConfigurationError(f"warping table {path}: expected two columns")
    r, psi = data[:, 0], data[:, 1]
    if r[0] != 0.0:
        raise ConfigurationError(f"warping table {path}: radii must start at 0")
    if np.any(np.diff(r) <= 0.0):
        raise ConfigurationError(f"warping table {path}: radii must be strictly increasing")
    if abs(psi[0]) > 1e-14 or np.any(psi[1:] <= 0.0):
        raise ConfigurationError(f"warping table {path}: need psi(0)=0 and psi>0 beyond")
    return r, psi


def tabulated(path_or_table, n: int, label: str = "tabulated") -> ModelManifold:
    """Model manifold from a sampled warping profile, linearly interpolated."""
    if isinstance(path_or_table, tuple):
        r, psi = (np.asarray(a, dtype=float) for a in path_or_table)
    else:
        r, psi = load_warping_table(path_or_table)

    def warp(x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, r, psi)

    return ModelManifold(n, warp, label, knots=tuple(r.tolist()), r_max=float(r[-1]))


def _panel_edges(m: ModelManifold, a: float, b: float) -> np.ndarray:
    edges = [a, b]
    if m.knots is not None:
        edges.extend(k for k in m.knots if a < k < b)
    edges = np.array(sorted(set(edges)))
    refined = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil((hi - lo) / _PANEL_LENGTH)))
        refined.append(np.linspace(lo, hi, k + 1)[:-1])
    refined.append(np.array([b]))
    return np.concatenate(refined)


def _weighted_arc(m: ModelManifold, a: float, b: float) -> float:
    """integral_a^b psi(s)^{n-1} ds by knot-aligned composite Gauss-Legendre."""
    if b <= a:
        return 0.0
    edges = _panel_edges(m, a, b)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    w = m.psi(pts) ** (m.dimension - 1)
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * w))


def volume_of_ball(m: ModelManifold, r: float) -> float:
    """mu(B(o, r)) = omega_{n-1} int_0^r psi^{n-1}; strictly increasing in r."""
    if r < 0.0 or r > m.r_max:
        raise DomainError(f"ball radius {r} outside [0, {m.r_max}]")
    return m.sphere_area * _weighted_arc(m, 0.0, float(r))


def ball_measure(m: ModelManifold, r: float) -> BallMeasure:
    return BallMeasure(radius=float(r), volume=volume_of_ball(m, r))


def shell_volumes(m: ModelManifold, radii: Sequence[float]) -> np.ndarray:
    """Measures of the shells between consecutive radii (one quadrature each).

    Summing the result telescopes exactly to the total shell integral, which
    is what grid construction relies on for mass consistency.
    """
    radii = np.asarray(radii, dtype=float)
    if radii[0] < 0.0 or radii[-1] > m.r_max or np.any(np.diff(radii) <= 0.0):
        raise DomainError("shell radii must be increasing within [0, r_max]")
    return np.array(
        [m.sphere_area * _weighted_arc(m, a, b) for a, b in zip(radii[:-1], radii[1:])]
    )


def volume_growth_exponent(
    m: ModelManifold, r_lo: float, r_hi: float, samples: int = 32
) -> GrowthFit:
    """Slope of log mu(B(r)) vs log r over [r_lo, r_hi], >= 16 sample radii."""
    if not (0.0 < r_lo < r_hi <= m.r_max):
        raise DomainError(f"need 0 < r_lo < r_hi <= {m.r_max}, got [{r_lo}, {r_hi}]")
    samples = max(16, int(samples))
    radii = np.geomspace(r_lo, r_hi, samples)
    vols = np.cumsum(
        np.concatenate(
            ([volume_of_ball(m, radii[0])], shell_volumes(m, radii))
        )
    )
    slope = np.polyfit(np.log(radii), np.log(vols), 1)[0]
    return GrowthFit(
        exponent=float(slope),
        window=(float(r_lo), float(r_hi)),
        samples=samples,
        narrow_window=bool(r_hi / r_lo < 2.0),
    )
