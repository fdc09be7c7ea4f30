"""Exception hierarchy shared by the solvers and the command-line front end."""


class HarvestError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(HarvestError, ValueError):
    """A model or configuration parameter is outside its admissible range."""


class DomainError(HarvestError, ValueError):
    """A function was evaluated outside the state interval."""


class AssumptionViolation(HarvestError):
    """The model violates a standing assumption needed by the solver."""


class NumericalError(HarvestError, ArithmeticError):
    """Quadrature, ODE integration or a series expansion failed to converge."""


class BracketError(NumericalError):
    """A root bracket does not contain a sign change."""
