"""Exception types shared across the package."""


class NumericsError(Exception):
    """Base class for all numerical/dynamical failures raised by hypman."""


class OutOfDomain(NumericsError):
    """Evaluation requested outside the valid domain of a function or chart."""


class NoRoot(NumericsError):
    """Target value lies outside the range of the function on the bracket."""


class NotMonotone(NumericsError):
    """Sampled values of a supposedly monotone function change direction."""


class BlowUp(NumericsError):
    """Non-finite state encountered during time integration."""


class NotHyperbolic(NumericsError):
    """Eigenvalue data incompatible with a hyperbolic splitting."""


class DeltaTooLarge(NumericsError):
    """Graph transform failed; the nonlinearity exceeds the contractive regime."""


class NoConvergence(NumericsError):
    """Fixed-point iteration did not reach the requested tolerance."""


class InversionFailure(NumericsError):
    """Newton inversion of a map did not converge."""


class RateTooTight(NumericsError):
    """Adapted-norm construction exhausted its truncation budget."""


class InvalidBounds(NumericsError):
    """Curvature bounds violated or unsatisfiable along a trajectory."""


class TruncatedTrajectory(NumericsError):
    """Flow trajectory left the chart domain before the requested time."""

    def __init__(self, message: str, exit_time: float):
        super().__init__(message)
        self.exit_time = exit_time


class UndefinedRatio(NumericsError):
    """Contraction ratio requested for two identical graphs."""


class NotApplicable(NumericsError):
    """Check requested on a configuration it does not apply to."""


class DegenerateRay(NumericsError):
    """Ray-boundary intersection closer than the degeneracy guard."""
