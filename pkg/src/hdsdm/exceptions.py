"""Exception types shared across the package."""


class DimensionError(ValueError):
    """A size argument or array shape is invalid for the requested object."""


class ValidationError(ValueError):
    """An input violates a structural requirement (symmetry, binary entries, ...)."""


class ConstraintError(ValueError):
    """A constraint matrix is rank deficient or cannot identify the effect."""


class DomainError(ValueError):
    """Covariate values fall outside the declared support.

    Carries the offending row indices in ``indices``.
    """

    def __init__(self, message, indices=None):
        super().__init__(message)
        self.indices = [] if indices is None else list(indices)


class DegenerateEffectError(ValueError):
    """An effect has (numerically) zero variance contribution."""


class CalibrationError(ValueError):
    """A prior calibration target is infeasible; carries the feasibility bound."""

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class NumericalError(RuntimeError):
    """A numeric computation produced an unusable result (e.g. d^2 << 0)."""


class DiagnosticError(RuntimeError):
    """MCMC adaptation or initialization failed a sanity check."""
