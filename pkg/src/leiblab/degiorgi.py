"""Level-set energy machinery: shrinking-cylinder ladders, the iteration
recursion constants, Caccioppoli-type budgets and the mean value bound.

All operations are pure post-processing over stored trajectories.  The
cylinders are Q_k = B(r_k) x [t_first, t_last] with

    r_k     = (1/2 + 2^{-k-1}) R        (R down to R/2),
    theta_k = (1 - 2^{-k}) theta        (0 up to theta),
    J_k     = space-time integral of ((u - theta_k)_+)^sigma over Q_k.

The Faber-Krahn exponent nu and the normalized Sobolev constant iota are
data of the geometry: nu defaults to p/n on Euclidean presets and iota is
a fitted constant, calibrated once per (manifold, n, p) on a reference
run.  Every verdict below uses ratios in which iota cancels or appears
through a fitted constant, so no sharp value is ever assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, PreconditionError
from .flux import LeibensonParams
from .geometry import volume_of_ball
from .grid import RadialGrid
from .stepping import Trajectory

__all__ = [
    "IterationSetup",
    "IterationTrace",
    "MeanValueReport",
    "CaccioppoliReport",
    "NormDecayReport",
    "level_energy",
    "run_iteration",
    "mean_value_check",
    "caccioppoli_check",
    "norm_decay_check",
    "radial_cutoff",
]


@dataclass(frozen=True)
class IterationSetup:
    """Geometry and exponents of one ladder: level exponent sigma, decay
    exponent lam = sigma - delta, outer radius R, Faber-Krahn data (nu,
    iota) and the fitted level constant c_fit."""

    sigma: float
    lam: float
    R: float
    nu: float
    iota: float = 1.0
    theta: float | None = None   # None: equality-case level from c_fit
    k_max: int = 8
    c_fit: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0.0 and self.lam > 0.0):
            raise ConfigurationError("need sigma > 0 and lam = sigma - delta > 0")
        if self.k_max < 6:
            raise ConfigurationError("k_max must be >= 6")
        if not (self.R > 0.0 and self.nu > 0.0 and self.iota > 0.0):
            raise ConfigurationError("R, nu, iota must be positive")

    @classmethod
    def for_params(
        cls,
        params: LeibensonParams,
        sigma: float,
        R: float,
        n: int,
        iota: float = 1.0,
        theta: float | None = None,
        k_max: int = 8,
        c_fit: float = 1.0,
    ) -> "IterationSetup":
        return cls(
            sigma=sigma,
            lam=sigma - params.delta,
            R=R,
            nu=params.p / n,
            iota=iota,
            theta=theta,
            k_max=k_max,
            c_fit=c_fit,
        )

    def caccioppoli_variant_ok(self, params: LeibensonParams) -> bool:
        """Whether sigma is large enough for the gradient-budget variant."""
        return self.sigma >= max(params.p, params.p * params.q)


@dataclass
class IterationTrace:
    radii: np.ndarray
    levels: np.ndarray
    energies: np.ndarray        # J_k
    theta: float
    Theta: float
    A_const: float
    nu: float
    rho: float                  # fitted geometric ratio, max_k (J_k/J_0)^{1/k}
    verdict: str                # "geometric-decay" | "violated"

    def ladder_rows(self) -> list[tuple]:
        """Rows (k, r_k, theta_k, J_k, bound_rhs) with the recursion bound
        J_0 A^{-k/nu}."""
        J0 = self.energies[0]
        return [
            (k, float(self.radii[k]), float(self.levels[k]), float(self.energies[k]),
             float(J0 * self.A_const ** (-k / self.nu)))
            for k in range(len(self.energies))
        ]

    def recursion_constants(self) -> np.ndarray:
        """Implied constants c_k = J_{k+1} Theta / (A^k J_k^{1+nu}); the
        two-cylinder recursion asserts these stay bounded."""
        J = self.energies
        out = np.full(len(J) - 1, np.nan)
        for k in range(len(J) - 1):
            if J[k] > 0.0:
                out[k] = J[k + 1] * self.Theta / (self.A_const**k * J[k] ** (1.0 + self.nu))
        return out


@dataclass
class MeanValueReport:
    lhs: float            # sup of u over the half-ball cylinder
    rhs: float            # fitted-constant bound
    ratio: float
    c_star: float         # constant making the bound an equality
    sigma: float
    lam: float
    R: float


@dataclass
class CaccioppoliReport:
    rows: list            # (theta0, theta1, r_in, r_out, T_time, T_grad, T_rhs, c2_star)
    c1: float
    c2_max: float
    variant_ok: bool


@dataclass
class NormDecayReport:
    t_term: float         # [sum V u^lam] between the window endpoints
    grad_term: float
    c1_star: float        # fitted coefficient, positive iff the budget holds
    ok: bool


def _window_indices(traj: Trajectory, t_window):
    t = traj.times
    if t_window is None:
        return np.arange(len(t))
    t1, t2 = t_window
    tol = 1e-12 * max(1.0, abs(float(t[-1])))
    if t1 < t[0] - tol or t2 > t[-1] + tol or t2 <= t1:
        raise DomainError(f"window [{t1}, {t2}] outside trajectory [{t[0]}, {t[-1]}]")
    sel = np.nonzero((t >= t1 - tol) & (t <= t2 + tol))[0]
    if len(sel) < 2:
        raise DomainError("window contains fewer than two snapshots")
    return sel


def level_energy(
    traj: Trajectory,
    grid: RadialGrid,
    r: float,
    theta_level: float,
    sigma: float,
    t_window=None,
) -> float:
    """Trapezoidal space-time integral of ((u - theta)_+)^sigma over
    B(r) x window, with the stored snapshots as time quadrature points."""
    if r > grid.radius * (1.0 + 1e-12):
        raise DomainError(f"ball radius {r} exceeds the domain radius {grid.radius}")
    if theta_level < 0.0:
        raise DomainError("level must be non-negative")
    sel = _window_indices(traj, t_window)
    mask = grid.ball_mask(r)
    excess = np.maximum(traj.values[np.ix_(sel, np.nonzero(mask)[0])] - theta_level, 0.0)
    per_time = excess**sigma @ grid.cell_volumes[mask]
    return float(np.trapezoid(per_time, traj.times[sel]))


def _require_vanishing_start(traj: Trajectory, grid: RadialGrid, r: float):
    mask = grid.ball_mask(r)
    u0 = traj.values[0]
    scale = max(1.0, float(np.max(np.abs(u0))))
    if float(np.max(np.abs(u0[mask]))) > 1e-12 * scale:
        raise PreconditionError(f"initial data does not vanish on the ball of radius {r}")


def run_iteration(
    traj: Trajectory,
    grid: RadialGrid,
    setup: IterationSetup,
    params: LeibensonParams,
) -> IterationTrace:
    """Compute the ladder J_k and judge geometric decay.

    The level theta comes from the equality case of the mean value bound
    with the fitted constant, unless the setup pins it explicitly.
    """
    _require_vanishing_start(traj, grid, setup.R)
    sigma, lam, R, nu = setup.sigma, setup.lam, setup.R, setup.nu
    p, q = params.p, params.q
    mu_ball = volume_of_ball(grid.manifold, R)

    J0 = level_energy(traj, grid, R, 0.0, sigma)
    if setup.theta is not None:
        theta = setup.theta
    else:
        theta = (setup.c_fit * J0 / (setup.iota * mu_ball * R**p)) ** (1.0 / lam)

    ks = np.arange(setup.k_max + 1)
    radii = (0.5 + 2.0 ** (-ks - 1.0)) * R
    levels = (1.0 - 2.0 ** (-ks)) * theta
    energies = np.array(
        [level_energy(traj, grid, radii[k], levels[k], sigma) for k in ks]
    )

    e = (q - 1.0) * (p - 1.0)
    A_const = 2.0 ** (lam * nu + p * (1.0 + nu) + e + nu * max(e, 0.0))
    Theta = (setup.iota * mu_ball * theta**lam * R**p) ** nu

    if energies[0] > 0.0:
        with np.errstate(divide="ignore"):
            ratios = (energies[1:] / energies[0]) ** (1.0 / ks[1:])
        rho = float(np.max(ratios)) if len(ratios) else 0.0
    else:
        rho = 0.0
    decays = rho < 1.0 and bool(np.all(energies[1:] <= energies[0]))
    return IterationTrace(
        radii=radii,
        levels=levels,
        energies=energies,
        theta=float(theta),
        Theta=float(Theta),
        A_const=float(A_const),
        nu=nu,
        rho=rho,
        verdict="geometric-decay" if decays else "violated",
    )


def mean_value_check(
    traj: Trajectory,
    grid: RadialGrid,
    setup: IterationSetup,
    params: LeibensonParams,
) -> MeanValueReport:
    """Compare sup u on the half-ball cylinder with the fitted-constant
    bound (c_fit J / (iota mu(B) R^p))^{1/lam} and report the constant
    that would make it an equality."""
    _require_vanishing_start(traj, grid, setup.R)
    sigma, lam, R = setup.sigma, setup.lam, setup.R
    mu_ball = volume_of_ball(grid.manifold, R)
    mask = grid.ball_mask(R / 2.0)
    lhs = float(np.max(traj.values[:, mask]))
    lhs = max(lhs, 0.0)
    J = level_energy(traj, grid, R, 0.0, sigma)
    denom = setup.iota * mu_ball * R**params.p
    rhs = (setup.c_fit * J / denom) ** (1.0 / lam) if J > 0.0 else 0.0
    if J > 0.0 and lhs > 0.0:
        c_star = lhs**lam * denom / J
    else:
        c_star = 0.0
    ratio = lhs / rhs if rhs > 0.0 else (0.0 if lhs == 0.0 else math.inf)
    return MeanValueReport(
        lhs=lhs, rhs=rhs, ratio=ratio, c_star=c_star, sigma=sigma, lam=lam, R=R
    )


def radial_cutoff(grid: RadialGrid, r_in: float, r_out: float) -> np.ndarray:
    """Canonical bump: 1 on B(r_in), linear down to 0 at (r_in + r_out)/2,
    zero beyond; the gradient magnitude is 2/(r_out - r_in)."""
    if not (0.0 < r_in < r_out <= grid.radius * (1.0 + 1e-12)):
        raise DomainError(f"cutoff radii ({r_in}, {r_out}) do not fit the domain")
    r_mid = 0.5 * (r_in + r_out)
    r = grid.nodes
    eta = np.clip((r_mid - r) / (r_mid - r_in), 0.0, 1.0)
    return eta


def _facewise_grad_integral(grid, traj_vals, times, nodal_field_fn, power):
    """Trapezoid in time of sum_f m_f |d(field)/dr|^power with the face
    measure m_f = area_f * dr_f."""
    m_f = grid.face_areas * grid.spacings
    per_time = np.empty(len(times))
    for j, u in enumerate(traj_vals):
        f = nodal_field_fn(u)
        g = np.diff(f) / grid.spacings
        per_time[j] = float(np.sum(m_f * np.abs(g) ** power))
    return float(np.trapezoid(per_time, times))


def caccioppoli_check(
    traj: Trajectory,
    grid: RadialGrid,
    setup: IterationSetup,
    params: LeibensonParams,
    theta_pairs=None,
    cutoffs=None,
    c1: float = 1e-3,
) -> CaccioppoliReport:
    """Energy budget with static radial cutoffs: for each level pair
    theta1 > theta0 > 0 and cutoff eta,

        [sum V ((u-theta1)_+)^lam eta^p]  +  c1 K- * grad term
            <=  c2 K+ * sum V ((u-theta0)_+)^sigma |grad eta|^p

    must admit one fitted c2 across the whole battery; K-+ are the level
    ratio factors with exponent (q-1)(p-1) split by sign.
    """
    sigma, lam = setup.sigma, setup.lam
    p, q = params.p, params.q
    alpha = sigma / p
    e = (q - 1.0) * (p - 1.0)
    u_max = float(np.max(traj.values))
    if theta_pairs is None:
        theta_pairs = [
            (0.05 * u_max, 0.10 * u_max),
            (0.10 * u_max, 0.30 * u_max),
            (0.20 * u_max, 0.50 * u_max),
        ]
    if cutoffs is None:
        R = setup.R
        cutoffs = [(0.5 * R, R), (0.6 * R, 0.95 * R), (0.3 * R, 0.8 * R)]

    V = grid.cell_volumes
    times = traj.times
    rows = []
    c2_max = 0.0
    for theta0, theta1 in theta_pairs:
        if not theta1 > theta0 > 0.0:
            raise DomainError(f"need theta1 > theta0 > 0, got ({theta0}, {theta1})")
        ratio = theta1 / (theta1 - theta0)
        k_minus = ratio ** min(e, 0.0)
        k_plus = ratio ** max(e, 0.0)
        for r_in, r_out in cutoffs:
            eta = radial_cutoff(grid, r_in, r_out)
            w_lam = np.maximum(traj.values - theta1, 0.0) ** lam
            t_term = float((w_lam[-1] - w_lam[0]) @ (V * eta**p))
            grad_term = _facewise_grad_integral(
                grid,
                traj.values,
                times,
                lambda u: np.maximum(u - theta1, 0.0) ** alpha * eta,
                p,
            )
            # RHS integrand lives on faces because |grad eta| does
            m_f = grid.face_areas * grid.spacings
            eta_slope = np.abs(np.diff(eta)) / grid.spacings
            w_sig = np.maximum(traj.values - theta0, 0.0) ** sigma
            face_avg = 0.5 * (w_sig[:, :-1] + w_sig[:, 1:])
            rhs_per_time = face_avg @ (m_f * eta_slope**p)
            rhs = float(np.trapezoid(rhs_per_time, times))

            numer = t_term + c1 * k_minus * grad_term
            if rhs > 0.0:
                c2_star = max(numer, 0.0) / (k_plus * rhs)
            else:
                c2_star = 0.0 if numer <= 1e-12 * max(1.0, grad_term) else math.inf
            rows.append((theta0, theta1, r_in, r_out, t_term, grad_term, rhs, c2_star))
            c2_max = max(c2_max, c2_star)
    return CaccioppoliReport(
        rows=rows,
        c1=c1,
        c2_max=c2_max,
        variant_ok=setup.caccioppoli_variant_ok(params),
    )


def norm_decay_check(
    traj: Trajectory,
    grid: RadialGrid,
    params: LeibensonParams,
    sigma: float,
) -> NormDecayReport:
    """Zero-cutoff energy budget on the whole ball: the lam-energy drop must
    pay for the gradient integral of u^{sigma/p} with one positive fitted
    coefficient.  Requires sigma >= p q."""
    if sigma < params.p * params.q:
        raise PreconditionError(f"needs sigma >= p q = {params.p * params.q}")
    lam = sigma - params.delta
    alpha = sigma / params.p
    V = grid.cell_volumes
    w = np.abs(traj.values) ** lam
    t_term = float((w[-1] - w[0]) @ V)
    grad_term = _facewise_grad_integral(
        grid, traj.values, traj.times, lambda u: np.abs(u) ** alpha, params.p
    )
    scale = float(w[0] @ V) + 1e-300
    ok = t_term <= 1e-10 * scale
    c1_star = -t_term / grad_term if grad_term > 0.0 else math.inf
    return NormDecayReport(t_term=t_term, grad_term=grad_term, c1_star=c1_star, ok=ok)
