"""Exception hierarchy shared across the package."""


class VartaError(Exception):
    """Base class for all package-specific errors."""


class DataValidationError(VartaError):
    """Input data violates a declared contract (shape, support, finiteness)."""


class NumericalError(VartaError):
    """A numerical computation failed (factorization, singular system, ...)."""


class NotPositiveDefiniteError(NumericalError):
    """Cholesky factorization failed.

    ``pivot`` is the 0-based index of the first failing pivot, when known.
    """

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class NonStationaryError(NumericalError):
    """Autoregressive coefficients imply a non-stationary latent process."""


class OmegaNotPDError(NotPositiveDefiniteError):
    """The innovation covariance implied by (A, Sigma) is not positive definite."""


class NonConvergenceError(NumericalError):
    """The optimizer stopped without meeting its convergence criteria."""
