"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    """Input of the wrong shape, size or domain."""


class InvalidSplit(InvalidArgument):
    """A split point outside the interior of its interval, or on a non-leaf."""


class InvalidSignal(ValueError):
    """A test signal that violates the observation model's parameter domain."""


class InvalidParams(ValueError):
    """Multiscale parameters outside their admissible range."""


class InvalidConfig(ValueError):
    """Inconsistent combination of estimator, model and run settings."""


class InvalidData(ValueError):
    """Data that cannot be summarized (e.g. nonpositive risks on a log scale)."""


class ResourceLimit(RuntimeError):
    """An exhaustive routine was asked for a problem beyond its size cap."""
