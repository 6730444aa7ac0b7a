"""Free-boundary measurements: support tracking, power-law rate fits and
dead-core persistence times.

Everything here post-processes stored trajectories.  The support radius
of a snapshot is the outermost node above a (relative) threshold; rate
fits regress log support against log time over an asymptotic window that
drops both the pre-asymptotic phase (support below twice its initial
value) and any boundary-contaminated tail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .flux import LeibensonParams
from .geometry import ModelManifold, volume_growth_exponent
from .grid import RadialGrid
from .stepping import Trajectory

__all__ = [
    "SupportTrace",
    "RateFit",
    "track_support",
    "fit_rate",
    "dead_core_time",
    "default_sigma",
]


def default_sigma(params: LeibensonParams) -> float:
    """Rate exponent default: 1 in the sharp-rate window delta < 1, else
    just above delta so the admissibility constraints hold."""
    if params.delta < 1.0:
        return 1.0
    return params.delta + 0.1


@dataclass
class SupportTrace:
    times: np.ndarray
    support_radius: np.ndarray
    threshold: float


@dataclass
class RateFit:
    beta_hat: float
    beta_theory: float
    rel_err: float
    window: tuple[float, float]
    samples: int
    alpha: float
    sigma: float


def track_support(
    traj: Trajectory, grid: RadialGrid, u_thresh: float | None = None
) -> SupportTrace:
    """Outermost node with u > threshold per snapshot; 0 when none.

    Default threshold is 1e-8 times the initial maximum (implicit solvers
    carry solver-tolerance tails, so an absolute zero test is meaningless).
    """
    if u_thresh is None:
        u_thresh = 1e-8 * float(np.max(traj.values[0]))
    if u_thresh < 0.0:
        raise DomainError("support threshold must be non-negative")
    above = traj.values > u_thresh
    cols = np.arange(traj.values.shape[1])
    outermost = np.where(above, cols[None, :], -1).max(axis=1)
    radii = np.where(outermost >= 0, grid.nodes[np.maximum(outermost, 0)], 0.0)
    return SupportTrace(times=traj.times.copy(), support_radius=radii, threshold=u_thresh)


def fit_rate(
    trace: SupportTrace,
    params: LeibensonParams,
    m: ModelManifold,
    sigma: float,
    domain_radius: float,
    min_samples: int = 10,
    boundary_frac: float = 0.9,
    t_min: float | None = None,
    time_shift: float = 0.0,
) -> RateFit:
    """Log-log least squares of support radius vs time over the asymptotic
    window, against the expected exponent p + alpha delta / sigma.

    Pre-asymptotic samples (support below twice its initial value, or time
    below t_min when given) are excluded, as are samples once the support
    passes boundary_frac of the domain.  Runs started from an aged source
    snapshot may pass the age as time_shift so the regression sees the
    physical time t + shift.
    """
    if not params.delta > 0.0:
        raise PreconditionError("rate fits require the slow regime (delta > 0)")
    # sigma = delta is admitted: the q = 1 families sit exactly on that edge
    # and their measured exponent still matches p + alpha delta / sigma.
    if not (sigma >= 1.0 and sigma >= params.delta):
        raise PreconditionError(f"sigma must satisfy sigma >= 1 and sigma >= delta={params.delta}")
    t = trace.times
    rho = trace.support_radius
    r0 = float(rho[0])
    keep = (t > 0.0) & (rho >= 2.0 * r0) & (rho > 0.0)
    keep &= rho <= boundary_frac * domain_radius
    if t_min is not None:
        keep &= t >= t_min
    n_kept = int(np.count_nonzero(keep))
    if n_kept < min_samples:
        raise DomainError(
            "insufficient asymptotic window (support hit the domain boundary "
            "or never doubled); rerun with a larger domain radius R"
        )
    slope = np.polyfit(np.log(t[keep] + time_shift), np.log(rho[keep]), 1)[0]
    beta_hat = 1.0 / slope
    if m.label == "euclidean":
        alpha = float(m.dimension)
    else:
        r_lo = max(float(np.min(rho[keep])), 1e-6 * domain_radius)
        alpha = volume_growth_exponent(m, r_lo, float(np.max(rho[keep]))).exponent
    beta_theory = params.p + alpha * params.delta / sigma
    return RateFit(
        beta_hat=float(beta_hat),
        beta_theory=float(beta_theory),
        rel_err=abs(beta_hat - beta_theory) / beta_theory,
        window=(float(np.min(t[keep])), float(np.max(t[keep]))),
        samples=n_kept,
        alpha=alpha,
        sigma=sigma,
    )


def dead_core_time(
    traj: Trajectory, grid: RadialGrid, B0_radius: float, eps_dead: float
) -> float:
    """First snapshot time at which u exceeds eps_dead somewhere on the
    half ball B(B0_radius / 2); the final time when it never does.

    The initial data must vanish on the whole ball B(B0_radius).
    """
    if not (0.0 < B0_radius <= grid.radius):
        raise DomainError(f"observation ball radius {B0_radius} does not fit the domain")
    if eps_dead <= 0.0:
        raise DomainError("eps_dead must be positive")
    u0 = traj.values[0]
    scale = max(1.0, float(np.max(np.abs(u0))))
    if float(np.max(np.abs(u0[grid.ball_mask(B0_radius)]))) > 1e-12 * scale:
        raise PreconditionError(
            f"initial data does not vanish on the ball of radius {B0_radius}"
        )
    mask = grid.ball_mask(B0_radius / 2.0)
    peaks = np.max(traj.values[:, mask], axis=1)
    hit = np.nonzero(peaks > eps_dead)[0]
    if len(hit) == 0:
        return float(traj.times[-1])
    return float(traj.times[hit[0]])
