"""Diffusion exponents and the one-dimensional radial fluxes.

Two flux laws live here.  The regularized law

    A(u, g) = q^{p-1} chi(u)^{(q-1)(p-1)} |g|^{p-2} g,
    chi(u)  = min(N, max(u, 1/N)),

is uniformly elliptic for each truncation level N and drives the
auxiliary problem with boundary value 1/N.  The degenerate limit law
acts on the gradient of u^q directly,

    Phi(w) = |w|^{p-2} w,            w = d_r(u^q),

and the two coincide wherever 1/N < u < N.  Everything is elementwise
over numpy arrays and free of state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Regime",
    "LeibensonParams",
    "RegLevel",
    "classify",
    "truncate",
    "reg_flux",
    "limit_flux",
    "flux_slope",
    "signed_power",
    "power_slope",
]


class Regime(str, enum.Enum):
    SLOW = "slow"
    CRITICAL = "critical"
    FAST = "fast"


def classify(p: float, q: float) -> Regime:
    """Diffusion regime from the sign of delta = q(p-1) - 1 (exact compare)."""
    if p <= 1.0 or q <= 0.0:
        raise ConfigurationError(f"need p > 1 and q > 0, got p={p}, q={q}")
    delta = q * (p - 1.0) - 1.0
    if delta > 0.0:
        return Regime.SLOW
    if delta < 0.0:
        return Regime.FAST
    return Regime.CRITICAL


@dataclass(frozen=True)
class LeibensonParams:
    """Exponent pair (p, q) with its derived invariants, frozen at build."""

    p: float
    q: float
    delta: float = field(init=False)
    regime: Regime = field(init=False)
    pq_ok: bool = field(init=False)

    def __post_init__(self):
        regime = classify(self.p, self.q)  # validates p, q
        object.__setattr__(self, "delta", self.q * (self.p - 1.0) - 1.0)
        object.__setattr__(self, "regime", regime)
        object.__setattr__(self, "pq_ok", self.p * self.q >= 1.0)


@dataclass(frozen=True)
class RegLevel:
    """Truncation level N > 1 of the regularized problem."""

    N: float

    def __post_init__(self):
        if not self.N > 1.0:
            raise ConfigurationError(f"truncation level must exceed 1, got {self.N}")

    @property
    def floor(self) -> float:
        return 1.0 / self.N


def truncate(u, reg: RegLevel):
    """chi(u) = min(N, max(u, 1/N)); total on the reals, range [1/N, N]."""
    return np.minimum(reg.N, np.maximum(u, reg.floor))


def signed_power(w, e: float):
    """sign(w) |w|^e, finite for every w when e > 0."""
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.abs(w) ** e


def limit_flux(w, params: LeibensonParams):
    """|w|^{p-2} w for w = d_r(u^q); evaluated as sign(w)|w|^{p-1}."""
    return signed_power(w, params.p - 1.0)


def reg_flux(u, g, reg: RegLevel, params: LeibensonParams):
    """q^{p-1} chi(u)^{(q-1)(p-1)} |g|^{p-2} g in the 1-D radial chart."""
    p, q = params.p, params.q
    chi = truncate(np.asarray(u, dtype=float), reg)
    return q ** (p - 1.0) * chi ** ((q - 1.0) * (p - 1.0)) * signed_power(g, p - 1.0)


def flux_slope(w, params: LeibensonParams, eps: float = 0.0):
    """d/dw of |w|^{p-2} w, desingularized to (p-1)(w^2 + eps^2)^{(p-2)/2}.

    eps enters linearizations only, never residuals.
    """
    w = np.asarray(w, dtype=float)
    return (params.p - 1.0) * (w * w + eps * eps) ** ((params.p - 2.0) / 2.0)


def power_slope(u, q: float, floor: float = 0.0):
    """d/du of the odd power |u|^{q-1} u, floored at |u| = floor for q < 1."""
    u = np.abs(np.asarray(u, dtype=float))
    if q < 1.0:
        u = np.maximum(u, floor)
    return q * u ** (q - 1.0)
