"""Weighted radial finite-volume grid and the discrete divergence operator.

Nodes 0 = r_0 < ... < r_M = R carry dual cells split at face midpoints;
cell volumes are measure-weighted shell integrals so that their sum is
exactly the ball volume.  The operator realizes div(A(u, grad u)) with a
zero-flux pole face (radial symmetry) and a strongly pinned Dirichlet row
at r = R.  Faces use the arithmetic mean of the adjacent nodal values
before truncation (regularized law) or the nodal difference of u^q
(degenerate law), which keeps every constant matching the boundary value
an exact steady state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flux as fx
from .errors import ConfigurationError, ContractViolation, DomainError
from .geometry import ModelManifold, shell_volumes

__all__ = [
    "RadialGrid",
    "StateField",
    "build_grid",
    "apply_operator",
    "face_fluxes",
    "operator_jacobian_band",
    "discrete_norm",
    "weighted_l2",
]


@dataclass(frozen=True)
class RadialGrid:
    """Immutable discrete carrier of the ball B(R) and its measure."""

    manifold: ModelManifold
    nodes: np.ndarray          # (M+1,) radii, nodes[0] = 0, nodes[-1] = R
    faces: np.ndarray          # (M,) midpoints between consecutive nodes
    spacings: np.ndarray       # (M,) node distances
    face_areas: np.ndarray     # (M,) omega_{n-1} psi(face)^{n-1}
    cell_volumes: np.ndarray   # (M+1,) dual-cell measures, sum = mu(B(R))

    @property
    def n_cells(self) -> int:
        return len(self.nodes) - 1

    @property
    def radius(self) -> float:
        return float(self.nodes[-1])

    @property
    def face_weights(self) -> np.ndarray:
        """omega psi(face)^{n-1} / dr, the natural Jacobian face weight."""
        return self.face_areas / self.spacings

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.cell_volumes))

    def ball_mask(self, r: float) -> np.ndarray:
        """Nodes inside the closed ball of radius r (tolerant at the rim)."""
        return self.nodes <= r * (1.0 + 1e-12)


@dataclass
class StateField:
    """Nodal solution values at one time instant."""

    values: np.ndarray
    time: float
    boundary_value: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ContractViolation("state contains non-finite values")
        v[-1] = self.boundary_value  # strong Dirichlet, exactly
        self.values = v

    def copy(self) -> "StateField":
        return StateField(self.values.copy(), self.time, self.boundary_value)


def build_grid(
    m: ModelManifold, radius: float, cells: int, grading: str = "uniform"
) -> RadialGrid:
    """Grid with M cells on [0, R]; boundary-refined grading puts ~30% of the
    nodes in the outer 10% of radius."""
    if radius <= 0.0:
        raise ConfigurationError(f"domain radius must be positive, got {radius}")
    if cells < 16:
        raise ConfigurationError(f"need at least 16 cells, got {cells}")
    if radius > m.r_max:
        raise ConfigurationError(
            f"domain radius {radius} exceeds manifold range {m.r_max}"
        )
    if grading == "uniform":
        nodes = np.linspace(0.0, radius, cells + 1)
    elif grading == "boundary-refined":
        k = max(4, int(round(0.3 * cells)))
        inner = np.linspace(0.0, 0.9 * radius, cells - k + 1)
        outer = np.linspace(0.9 * radius, radius, k + 1)
        nodes = np.concatenate([inner[:-1], outer])
    else:
        raise ConfigurationError(f"unknown grading '{grading}'")

    faces = 0.5 * (nodes[:-1] + nodes[1:])
    spacings = np.diff(nodes)
    face_areas = m.sphere_area * m.psi(faces) ** (m.dimension - 1)
    edges = np.concatenate(([0.0], faces, [radius]))
    volumes = shell_volumes(m, edges)
    if np.any(volumes[1:] <= 0.0) or (m.dimension == 1 and volumes[0] <= 0.0):
        raise ConfigurationError("degenerate cell volumes; check the warping profile")
    return RadialGrid(
        manifold=m,
        nodes=nodes,
        faces=faces,
        spacings=spacings,
        face_areas=face_areas,
        cell_volumes=volumes,
    )


def _check_state(grid: RadialGrid, values: np.ndarray):
    if len(values) != grid.n_cells + 1:
        raise ContractViolation(
            f"state has {len(values)} nodes, grid has {grid.n_cells + 1}"
        )


def face_fluxes(
    grid: RadialGrid,
    values: np.ndarray,
    params: fx.LeibensonParams,
    reg: fx.RegLevel | None = None,
) -> np.ndarray:
    """Integrated flux a_f * A_f through each interior face, signed outward."""
    _check_state(grid, values)
    u = np.asarray(values, dtype=float)
    if reg is None:
        v = fx.signed_power(u, params.q)
        w = np.diff(v) / grid.spacings
        return grid.face_areas * fx.limit_flux(w, params)
    ubar = 0.5 * (u[:-1] + u[1:])
    g = np.diff(u) / grid.spacings
    return grid.face_areas * fx.reg_flux(ubar, g, reg, params)


def apply_operator(
    grid: RadialGrid,
    state: StateField | np.ndarray,
    params: fx.LeibensonParams,
    reg: fx.RegLevel | None = None,
) -> np.ndarray:
    """Discrete div(A(u, grad u)) per unit measure; Dirichlet row returns 0.

    Row i < M is (F_{i+1/2} - F_{i-1/2}) / V_i with F_{-1/2} = 0 at the pole.
    """
    values = state.values if isinstance(state, StateField) else state
    F = face_fluxes(grid, values, params, reg)
    out = np.zeros(grid.n_cells + 1)
    out[0] = F[0] / grid.cell_volumes[0]
    out[1:-1] = np.diff(F) / grid.cell_volumes[1:-1]
    return out


def operator_jacobian_band(
    grid: RadialGrid,
    values: np.ndarray,
    params: fx.LeibensonParams,
    reg: fx.RegLevel | None = None,
) -> np.ndarray:
    """Banded (3, M+1) tridiagonal of d(apply_operator)/du.

    Uses the desingularized slope (p < 2) and a floored chain factor (q < 1):
    both enter the linearization only, never the residual.  The Dirichlet
    row M is all zero; steppers overwrite it with the identity.
    """
    _check_state(grid, values)
    u = np.asarray(values, dtype=float)
    M = grid.n_cells
    if reg is None:
        v = fx.signed_power(u, params.q)
        w = np.diff(v) / grid.spacings
        eps = 1e-10 * max(1.0, float(np.max(np.abs(w))) if len(w) else 1.0)
        slope = fx.flux_slope(w, params, eps)
        floor = 1e-12 * max(1.0, float(np.max(np.abs(u))))
        dv = fx.power_slope(u, params.q, floor)
        dF_lo = -grid.face_areas * slope * dv[:-1] / grid.spacings  # wrt u_i
        dF_hi = grid.face_areas * slope * dv[1:] / grid.spacings    # wrt u_{i+1}
    else:
        ubar = 0.5 * (u[:-1] + u[1:])
        g = np.diff(u) / grid.spacings
        eps = 1e-10 * max(1.0, float(np.max(np.abs(g))) if len(g) else 1.0)
        p, q = params.p, params.q
        e = (q - 1.0) * (p - 1.0)
        chi = fx.truncate(ubar, reg)
        chi_active = ((ubar > reg.floor) & (ubar < reg.N)).astype(float)
        coeff = q ** (p - 1.0) * chi ** e
        phi = fx.signed_power(g, p - 1.0)
        dcoeff = q ** (p - 1.0) * e * chi ** (e - 1.0) * chi_active * 0.5
        slope = fx.flux_slope(g, params, eps)
        dF_lo = grid.face_areas * (dcoeff * phi - coeff * slope / grid.spacings)
        dF_hi = grid.face_areas * (dcoeff * phi + coeff * slope / grid.spacings)

    V = grid.cell_volumes
    diag = np.zeros(M + 1)
    upper = np.zeros(M + 1)  # band storage: upper[j] couples row j-1 to col j
    lower = np.zeros(M + 1)  # lower[j] couples row j+1 to col j
    diag[0] = dF_lo[0] / V[0]
    diag[1:M] = (dF_lo[1:] - dF_hi[:-1]) / V[1:M]
    upper[1 : M + 1] = dF_hi / V[0:M]
    lower[0 : M - 1] = -dF_lo[: M - 1] / V[1:M]
    # row M stays zero (Dirichlet)
    return np.vstack([upper, diag, lower])


def discrete_norm(grid: RadialGrid, state: StateField | np.ndarray, lam: float) -> float:
    """(sum_i V_i |u_i|^lam)^{1/lam}; lam = inf gives max_i |u_i|."""
    values = state.values if isinstance(state, StateField) else np.asarray(state, float)
    _check_state(grid, values)
    a = np.abs(values)
    if np.isinf(lam):
        return float(np.max(a))
    if lam < 1.0:
        raise DomainError(f"norm exponent must be >= 1 or inf, got {lam}")
    return float(np.sum(grid.cell_volumes * a**lam) ** (1.0 / lam))


def weighted_l2(grid: RadialGrid, values: np.ndarray) -> float:
    """sqrt(sum V_i x_i^2) without the contract checks (solver hot path)."""
    return float(np.sqrt(np.sum(grid.cell_volumes * values * values)))
