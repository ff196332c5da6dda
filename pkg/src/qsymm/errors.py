class QsymmError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(QsymmError, ValueError):
    pass


class ConfigError(QsymmError, ValueError):
    pass


class BudgetExceeded(QsymmError):
    """An m!-enumeration or exact-mode computation exceeds its size cap."""


class StateViolation(QsymmError, ValueError):
    """A matrix fails one of the density-matrix invariants.

    ``magnitude`` is the measured size of the violation.
    """

    kind = "state"

    def __init__(self, magnitude: float, message: str | None = None):
        self.magnitude = float(magnitude)
        super().__init__(message or f"{self.kind} violation of magnitude {self.magnitude:.3e}")


class HermiticityViolation(StateViolation):
    kind = "hermiticity"


class TraceViolation(StateViolation):
    kind = "trace"


class NegativityViolation(StateViolation):
    kind = "negativity"


class StepTooLarge(QsymmError, ValueError):
    pass


class InvariantBreach(QsymmError, ArithmeticError):
    """Raised by the integrators when a physical invariant is lost mid-run."""

    def __init__(self, t: float, what: str, value: float):
        self.t = t
        self.what = what
        self.value = value
        super().__init__(f"{what} = {value:.3e} at t = {t:.6g}")


class NormDrift(InvariantBreach):
    pass
