"""Exception hierarchy shared by all modules."""


class DegwaveError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(DegwaveError, ValueError):
    """Invalid grid or experiment configuration."""


class ParameterError(DegwaveError, ValueError):
    """(alpha, mu) outside the admissible set alpha in [0,2)\\{1}, mu <= mu(alpha)."""


class UnsupportedRegimeError(ParameterError):
    """alpha = 1 is excluded."""


class SingularIntegrandError(DegwaveError, ValueError):
    """A weighted integral diverges at x = 0."""


class BoundaryConditionError(DegwaveError, ValueError):
    """A grid function violates the boundary conditions of its regime."""


class TransformDomainError(DegwaveError, ValueError):
    """The change of variables produced non-finite values at interior nodes."""


class EquivalenceNotApplicableError(DegwaveError, ValueError):
    """Norm equivalence requested in the critical case mu = mu(alpha)."""


class SolverError(DegwaveError, RuntimeError):
    """A linear solve did not meet its residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TrajectoryError(DegwaveError, ValueError):
    """A trajectory lacks the stored states an operation needs."""


class ObservabilityError(DegwaveError, ValueError):
    """Observability quotient undefined (zero initial energy)."""


class NotControllableError(DegwaveError, RuntimeError):
    """CG on the Gramian hit negative curvature or stagnated."""

    def __init__(self, message, iterations=0, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
