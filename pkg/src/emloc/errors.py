"""Exception hierarchy shared by all emloc modules."""


class EmlocError(Exception):
    """Base class for every error raised by emloc."""


class InvalidArgumentError(EmlocError, ValueError):
    pass


class EmptyRegionError(EmlocError):
    pass


class EmptyGammaError(EmlocError):
    pass


class EllipticityError(EmlocError):
    """A material matrix is not symmetric positive definite."""

    def __init__(self, message, region=None):
        super().__init__(message)
        self.region = region


class ResonanceError(EmlocError):
    """The system matrix is singular or too close to singular.

    ``estimate`` carries the relative smallest-singular-value estimate
    (0.0 when the factorization itself broke down).
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class EigenSolverError(EmlocError):
    pass


class ConfigError(EmlocError):
    """Configuration problems, one entry per offending line/key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class OutputError(EmlocError):
    """A report or export file could not be written."""
