"""Exception hierarchy shared by all jordanflow modules."""


class JordanFlowError(Exception):
    """Base class for all library errors."""


class InputError(JordanFlowError, ValueError):
    """Invalid or out-of-contract input (bad shape, non-finite, wrong trace/det)."""


class NonConvergence(JordanFlowError):
    """The eigenvalue iteration failed to converge."""


class IllConditioned(JordanFlowError):
    """Spectral clusters cannot be separated reliably at the requested tolerance.

    Carries the measured residuals/margins so the caller can report rather
    than guess.
    """

    def __init__(self, message, margins=None):
        super().__init__(message)
        self.margins = dict(margins or {})


class Singular(JordanFlowError):
    """Matrix is singular (or numerically so) where an inverse is required."""


class BranchObstruction(JordanFlowError):
    """An eigenvalue lies on the closed negative real axis; no principal real log."""


class Overflow(JordanFlowError):
    """Requested evaluation exceeds the floating-point exponential budget."""


class NotNilpotent(JordanFlowError):
    """Matrix is not nilpotent within tolerance."""


class NotElliptic(JordanFlowError):
    """Matrix has an eigenvalue off the unit circle beyond tolerance."""


class DimensionTooLarge(JordanFlowError):
    """Wedge-power dimension C(n, p) exceeds the supported cap."""


class GridTooLarge(JordanFlowError):
    """Chain-oracle grid is infeasible (dimension or resolution)."""


class RankAmbiguous(JordanFlowError):
    """A rank decision fell too close to its singular-value threshold.

    ``margins`` maps a description of each offending decision to the ratio
    sigma / threshold.
    """

    def __init__(self, message, margins=None):
        super().__init__(message)
        self.margins = dict(margins or {})


class StiffnessSuspected(JordanFlowError):
    """Integrator error estimate exceeded its budget."""


class NoRealLog(JordanFlowError):
    """No m in the search budget yields a real logarithm of the monodromy."""
