"""Exception hierarchy shared by all atlaslab modules."""


class AtlasLabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AtlasLabError):
    """Invalid argument, precondition violation, or bad configuration."""


class NumericalError(AtlasLabError):
    """A computation produced values outside its numerical contract.

    Raised e.g. when a discrete identity that should hold to round-off is
    violated, or when a portfolio wealth factor becomes non-positive.
    """


class EvaluationError(NumericalError):
    """A generating function could not be evaluated at a grid point."""
