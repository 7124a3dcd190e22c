"""Exception hierarchy shared by all modules."""


class DelayLQGError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DelayLQGError, ValueError):
    """An argument lies outside the admissible domain."""


class DimensionError(DomainError):
    """Matrix shapes are incompatible with the operation."""


class UnsupportedDimensionError(DimensionError):
    pass


class ResonanceError(DelayLQGError, ArithmeticError):
    """Lyapunov operator is singular because two eigenvalues sum to zero."""

    def __init__(self, lam_i, lam_j):
        self.pair = (complex(lam_i), complex(lam_j))
        super().__init__(
            f"Lyapunov equation is singular: eigenvalues {lam_i:.6g} and "
            f"{lam_j:.6g} sum to zero"
        )


class SingularAngleError(DomainError):
    """Detector angle too close to pi/2 or 3pi/2."""


class SynthesisError(DelayLQGError, ArithmeticError):
    """No stabilizing Riccati solution could be computed."""


class DivergingCostError(DelayLQGError, ArithmeticError):
    """Uncontrolled cost is infinite because the plant is not Hurwitz."""


class OptimizationError(DelayLQGError):
    pass


class FitError(DelayLQGError):
    pass


class DivergenceError(DelayLQGError, ArithmeticError):
    """A simulated trajectory or controller state blew up."""
