"""Exception hierarchy shared by all fucik_lab modules."""


class FucikLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(FucikLabError, ValueError):
    pass


class KernelError(FucikLabError, ValueError):
    pass


class SingularityError(KernelError):
    """Kernel evaluated at the origin."""


class AssemblyError(FucikLabError):
    pass


class SpectrumError(FucikLabError):
    pass


class MultiplicityError(SpectrumError):
    """Principal eigenvalue is numerically not simple."""


class MinimaxError(FucikLabError):
    pass


class ContinuationError(FucikLabError):
    """Semismooth Newton or curve tracing failed.

    ``last`` carries the final iterate (a ``(u, t)`` pair) when available.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class SpecError(FucikLabError, ValueError):
    """A nonlinearity violates one of the slope/primitive hypotheses."""


class NonresonanceError(FucikLabError):
    pass


class ConfigError(FucikLabError, ValueError):
    pass


class NearBoundaryWarning(UserWarning):
    pass
