"""Exception types shared across the package."""


class HetcointError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(HetcointError):
    """A parameter or data vector has the wrong length."""


class RankDeficient(HetcointError):
    """The regressor matrix is not of full column rank."""


class NumericalFailure(HetcointError):
    """Non-finite values encountered during optimization."""


class DegenerateVariance(HetcointError):
    """A variance estimate is zero (e.g. all residuals identically zero)."""


class NotPositiveDefinite(HetcointError):
    """The innovation covariance matrix is not positive definite."""


class BlockOutOfRange(HetcointError):
    """A subresidual block does not fit inside the sample."""


class GridTooSmall(HetcointError):
    """The block-size grid has fewer than three candidate values."""


class InsufficientSample(HetcointError):
    """The sample is too short for the requested regression."""


class UnsupportedModel(HetcointError):
    """The operation is not defined for this model family."""


class NonConvergence(HetcointError):
    """The original regression did not converge; inference would be invalid.

    Raised by test operations only.  Fitting routines report nonconvergence
    through ``FitResult.converged`` instead, so simulation harnesses can
    exclude the replication.
    """


class AllBootstrapFitsFailed(HetcointError):
    """Every bootstrap refit failed to converge."""


class ParseError(HetcointError):
    """An input file could not be parsed."""


class MissingColumn(HetcointError):
    """A required column is absent from the input file."""
