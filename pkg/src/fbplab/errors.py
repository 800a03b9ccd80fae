"""Exception hierarchy shared by all modules.

Precondition failures map to CLI exit code 2, numerical failures to 3.
"""


class PreconditionError(ValueError):
    """Input outside the domain where an operation is defined."""


class ResolutionError(PreconditionError):
    """Requested radius or scale is below the grid resolution."""


class DomainError(PreconditionError):
    """Support, interval or perturbation is incompatible with the data."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to deliver a trustworthy value."""


class TruncationError(NumericalError):
    """Truncated quadrature tail exceeds the requested tolerance."""


class ConstructionError(NumericalError):
    """A competitor or profile could not be built as requested."""
