"""Exception types shared across the library."""


class DiffKernError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(DiffKernError, ValueError):
    """Bad argument: wrong shape, wrong range, wrong combination."""


class KernelEvaluationError(DiffKernError):
    """A kernel evaluator produced a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SingularOperatorError(DiffKernError):
    """Operator is singular or too ill-conditioned to solve against."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class ConvergenceError(DiffKernError):
    """Iterative solve failed to reach the requested residual."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class NearSingularGError(DiffKernError):
    """The coupling matrix G(lam) is numerically singular at this lam."""

    def __init__(self, message, lam=None, cond=None):
        super().__init__(message)
        self.lam = lam
        self.cond = cond


class PoleProximityError(DiffKernError):
    """mu_k is too close to lam_k for the requested one-axis rho form."""

    def __init__(self, message, suggested_axis=None):
        super().__init__(message)
        self.suggested_axis = suggested_axis


class UnsupportedEvaluationError(DiffKernError):
    """No admissible one-axis rho form exists (mu == lam in both coordinates)."""


class ConfigError(DiffKernError):
    """Config file problem, with the offending line/field when known."""

    def __init__(self, message, line=None, field=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{message}{' [' + ', '.join(loc) + ']' if loc else ''}")
        self.line = line
        self.field = field
