"""leiblab: a numerical laboratory for doubly nonlinear diffusion
du/dt = div(|grad u^q|^{p-2} grad u^q) on radially symmetric model
manifolds, with a truncation-level continuation pipeline and the
quantitative diagnostics it is supposed to satisfy (comparison,
norm monotonicity, level-set decay, mean value bound, finite
propagation speed).
"""

from .errors import (
    ConfigurationError,
    ContractViolation,
    DomainError,
    PreconditionError,
    StepFailure,
)
from .flux import LeibensonParams, Regime, RegLevel, classify, limit_flux, reg_flux, truncate
from .geometry import (
    ModelManifold,
    euclidean,
    hyperbolic_like,
    tabulated,
    volume_growth_exponent,
    volume_of_ball,
)
from .grid import RadialGrid, StateField, apply_operator, build_grid, discrete_norm
from .oracles import BarenblattProfile, evaluate_barenblatt, oracle_residual
from .propagation import RateFit, SupportTrace, dead_core_time, fit_rate, track_support
from .stepping import (
    ContinuationResult,
    ContinuationSchedule,
    TimeStepConfig,
    Trajectory,
    advance,
    run_continuation,
    run_limit,
    run_regularized,
    step_implicit,
)

__version__ = "0.1.0"
