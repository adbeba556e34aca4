"""Exception hierarchy shared across the package."""


class GsdeError(Exception):
    """Base class for all package errors."""


class ConfigError(GsdeError, ValueError):
    """Invalid configuration (bad interval, counts, schedule...)."""


class UsageError(GsdeError, ValueError):
    """Inputs inconsistent with each other (grid mismatch, mixed rounds...)."""


class DomainError(GsdeError, ValueError):
    """Argument outside the admissible domain (theta outside the parameter set, p < 2...)."""


class SimulationDiverged(GsdeError, ArithmeticError):
    """A simulated state left the finite range."""

    def __init__(self, step, value=None, context=None):
        self.step = step
        self.value = value
        self.context = dict(context or {})
        msg = f"simulation diverged at step {step}"
        if value is not None:
            msg += f" (|x| = {abs(value):.3g})"
        if self.context:
            msg += " [" + ", ".join(f"{k}={v}" for k, v in self.context.items()) + "]"
        super().__init__(msg)


class EstimationError(GsdeError, ArithmeticError):
    """The least-squares objective could not be evaluated or minimised."""


class DegeneratePathError(EstimationError):
    """Closed-form estimator denominator vanished (all-zero path)."""
