"""Exception hierarchy shared by the khessian modules."""


class KHessianError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(KHessianError, ValueError):
    """An index or argument lies outside the domain of an operation."""


class NumericError(KHessianError, ArithmeticError):
    """Non-finite input or a failed floating point decomposition."""


class ConeViolationError(KHessianError, ValueError):
    """A spectrum is required to lie in a Garding cone but does not."""


class InvalidBodyError(KHessianError, ValueError):
    """The radial function of a body is not positive everywhere."""


class NonPositiveRadiusError(InvalidBodyError):
    """The radial function of a body vanishes or turns negative somewhere."""


class ConvexityError(InvalidBodyError):
    """The boundary curvature of a body is not positive everywhere."""

    def __init__(self, message, theta=None, curvature=None):
        super().__init__(message)
        self.theta = theta
        self.curvature = curvature


class PreconditionError(KHessianError, ValueError):
    """Inputs violate a documented precondition of a check."""


class SolverError(KHessianError, RuntimeError):
    """Base class for failures of the nonlinear solvers."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ConeBreakdownError(SolverError):
    """Line search could not keep the iterate inside the admissible cone."""


class NonConvergenceError(SolverError):
    """Newton iteration hit its iteration cap."""


class ContinuationDivergenceError(SolverError):
    """The lambda_eps sequence stopped contracting along the eps schedule."""


class SingularSystemError(SolverError):
    """The bordered Jacobian is numerically singular."""

    def __init__(self, message, condition=None, trace=None):
        super().__init__(message, trace)
        self.condition = condition
