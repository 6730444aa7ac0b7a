"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration errors exit 2,
solver failures exit 3, property/monitor failures exit 1.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A run configuration is structurally invalid or incomplete."""


class ContractViolation(ValueError):
    """Mismatched objects handed to an operation (wrong grid, sizes, ...)."""


class PreconditionError(ValueError):
    """A documented hypothesis of a diagnostic is not met by the data."""


class StepFailure(RuntimeError):
    """The nonlinear solve of an implicit step failed after all retries."""

    def __init__(self, message, residual=None, dt=None):
        super().__init__(message)
        self.residual = residual
        self.dt = dt
