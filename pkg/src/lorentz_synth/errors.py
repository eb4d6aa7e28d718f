"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an operation precondition is violated."""


class HypothesisViolatedError(ValueError):
    """Raised when a theorem's smallness hypothesis fails (not a bug: the
    statement simply does not apply to the inputs)."""


class NoGeodesicError(ValueError):
    """Raised when a maximizing geodesic is requested between points that are
    not chronologically related."""


class DegenerateMetricError(ValueError):
    """Raised when a metric loses Lorentzian signature (e.g. after smoothing
    or cone narrowing)."""


class UnsupportedModelError(ValueError):
    """Raised when an operation needs structure a model does not offer
    (e.g. closed-form radial geodesics on a non-flat chart)."""
