"""Closed-form self-similar reference solutions in the classical overlaps.

Three families, all obtained from the similarity ansatz
u = tt^{-alpha} F(r tt^{-beta}) with tt = t + t_offset and mass fixing
alpha = n beta:

  porous-medium (p = 2, q > 1):
      F(xi) = (c - k xi^2)_+^{1/(q-1)},
      beta = 1/(n(q-1) + 2),  k = beta (q-1) / (2 q)

  p-laplace (q = 1, p > 2):
      F(xi) = (c - k xi^{p/(p-1)})_+^{(p-1)/(p-2)},
      beta = 1/(n(p-2) + p),  k = ((p-2)/p) beta^{1/(p-1)}

  heat (p = 2, q = 1):
      u = c tt^{-n/2} exp(-r^2 / (4 tt))

The profile constants come from substituting the ansatz back into the
evolution law; oracle_residual provides the numerical substitution check
that any refactor of these formulas must keep passing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError
from .flux import LeibensonParams
from .grid import RadialGrid, apply_operator

__all__ = [
    "BarenblattProfile",
    "evaluate_barenblatt",
    "support_radius",
    "oracle_residual",
    "sample_on_grid",
]

FAMILIES = ("porous-medium", "p-laplace", "heat")


@dataclass(frozen=True)
class BarenblattProfile:
    """Self-similar source solution; c is the profile constant (amplitude
    scale) and t_offset > 0 the age of the source at simulation time 0."""

    family: str
    n: int
    exponent: float  # q for porous-medium, p for p-laplace; ignored for heat
    c: float
    t_offset: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family '{self.family}'")
        if self.family == "porous-medium" and not self.exponent > 1.0:
            raise ConfigurationError("porous-medium family needs q > 1")
        if self.family == "p-laplace" and not self.exponent > 2.0:
            raise ConfigurationError("p-laplace family needs p > 2")
        if not (self.c > 0.0 and self.t_offset > 0.0):
            raise ConfigurationError("need c > 0 and t_offset > 0")

    @property
    def params(self) -> LeibensonParams:
        if self.family == "porous-medium":
            return LeibensonParams(2.0, self.exponent)
        if self.family == "p-laplace":
            return LeibensonParams(self.exponent, 1.0)
        return LeibensonParams(2.0, 1.0)

    @property
    def beta_similarity(self) -> float:
        """Similarity exponent: support radius grows like tt^beta."""
        if self.family == "porous-medium":
            return 1.0 / (self.n * (self.exponent - 1.0) + 2.0)
        if self.family == "p-laplace":
            return 1.0 / (self.n * (self.exponent - 2.0) + self.exponent)
        return 0.5

    @property
    def alpha_decay(self) -> float:
        return self.n * self.beta_similarity if self.family != "heat" else self.n / 2.0

    @property
    def k_const(self) -> float:
        if self.family == "porous-medium":
            q = self.exponent
            return self.beta_similarity * (q - 1.0) / (2.0 * q)
        if self.family == "p-laplace":
            p = self.exponent
            return (p - 2.0) / p * self.beta_similarity ** (1.0 / (p - 1.0))
        raise DomainError("heat kernel has no finite profile edge")


def _aged(profile: BarenblattProfile, t: float) -> float:
    tt = t + profile.t_offset
    if tt <= 0.0:
        raise DomainError(f"time {t} precedes the source (offset {profile.t_offset})")
    return tt


def evaluate_barenblatt(profile: BarenblattProfile, r, t: float) -> np.ndarray:
    r = np.abs(np.asarray(r, dtype=float))
    tt = _aged(profile, t)
    if profile.family == "heat":
        return profile.c * tt ** (-profile.n / 2.0) * np.exp(-(r * r) / (4.0 * tt))
    a, b = profile.alpha_decay, profile.beta_similarity
    xi = r * tt ** (-b)
    if profile.family == "porous-medium":
        core = np.maximum(profile.c - profile.k_const * xi * xi, 0.0)
        return tt ** (-a) * core ** (1.0 / (profile.exponent - 1.0))
    p = profile.exponent
    core = np.maximum(profile.c - profile.k_const * xi ** (p / (p - 1.0)), 0.0)
    return tt ** (-a) * core ** ((p - 1.0) / (p - 2.0))


def support_radius(profile: BarenblattProfile, t: float) -> float:
    """Exact free-boundary radius; infinite for the heat family."""
    tt = _aged(profile, t)
    if profile.family == "heat":
        return np.inf
    if profile.family == "porous-medium":
        edge = np.sqrt(profile.c / profile.k_const)
    else:
        p = profile.exponent
        edge = (profile.c / profile.k_const) ** ((p - 1.0) / p)
    return float(edge * tt**profile.beta_similarity)


def sample_on_grid(profile: BarenblattProfile, grid: RadialGrid, t: float) -> np.ndarray:
    return evaluate_barenblatt(profile, grid.nodes, t)


def oracle_residual(
    profile: BarenblattProfile,
    grid: RadialGrid,
    t: float,
    dt: float,
    interior_frac: float = 0.8,
) -> float:
    """max |(u(t+dt) - u(t))/dt - L(u(t+dt))| away from the free boundary.

    The region is r <= interior_frac * support(t) for compact families and
    r <= interior_frac * R for the heat kernel; the one-sided difference
    matches the implicit stepper, so the value decays like O(h^2 + dt).
    """
    u_now = sample_on_grid(profile, grid, t)
    u_next = sample_on_grid(profile, grid, t + dt)
    L = apply_operator(grid, u_next, profile.params, None)
    res = (u_next - u_now) / dt - L
    edge = support_radius(profile, t)
    cut = interior_frac * min(edge, grid.radius)
    mask = grid.nodes <= cut
    mask[-1] = False
    if not np.any(mask):
        raise DomainError("interior region is empty; enlarge the grid or frac")
    return float(np.max(np.abs(res[mask])))
