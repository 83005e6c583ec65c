"""Exception types shared across the package."""


class HierlapError(Exception):
    """Base class for all package-specific errors."""


class PoleProximity(HierlapError):
    """Evaluation point is within the configured guard radius of a spectral pole."""


class RecurrentRegime(HierlapError):
    """Green function requested but the zero-energy resolvent series diverges."""


class SecularSingularity(HierlapError):
    """The secular matrix is numerically singular at the requested point."""


class ToleranceNotMet(HierlapError):
    """A root or endpoint could not be certified to the requested tolerance."""


class RootCountAmbiguous(HierlapError):
    """Root search cannot separate near-degenerate secular roots at scan resolution."""


class RootRejected(HierlapError):
    """A value submitted as a secular root is not one to within the acceptance threshold."""


class SymmetryViolation(HierlapError):
    """Matrix handed to the symmetric eigensolver is not symmetric within tolerance."""


class ConvergenceFailure(HierlapError):
    """The underlying dense factorization or eigensolver failed to converge."""


class NearSingular(HierlapError):
    """Shifted dense system is too close to singular for a certified solve."""
