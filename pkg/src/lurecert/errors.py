"""Exception hierarchy shared by all modules."""


class LurecertError(Exception):
    """Base class for all package errors."""


class ArgumentError(LurecertError, ValueError):
    """An argument is outside the operation's domain."""


class MalformedNonlinearity(LurecertError, ValueError):
    """The nonlinearity cannot be evaluated or violates phi(0) = 0."""


class AssumptionViolation(LurecertError, ValueError):
    """The nonlinearity does not satisfy the structure the construction relies on."""


class ApproximationInvalid(LurecertError):
    """Sampled approximation error exceeds the claimed Lipschitz constant."""


class AssemblyError(LurecertError):
    """The LMI problem could not be assembled from the given data."""


class InfeasibleProblem(LurecertError):
    """The backend proved the LMI problem infeasible at its tolerance."""

    def __init__(self, message, status=None, log=None):
        super().__init__(message)
        self.status = status
        self.log = log


class SolverFailure(LurecertError):
    """The backend crashed, diverged or returned no usable status."""

    def __init__(self, message, status=None, log=None):
        super().__init__(message)
        self.status = status
        self.log = log


class IntegrationError(LurecertError):
    """The ODE integrator stopped before the requested horizon."""

    def __init__(self, message, last_time=None):
        super().__init__(message)
        self.last_time = last_time


class SchemaError(LurecertError, ValueError):
    """A description or artifact file does not match its schema."""
