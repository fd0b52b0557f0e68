"""Exception hierarchy shared by the certification modules."""


class DomcertError(Exception):
    """Base class for all domcert errors."""


class InputError(DomcertError, ValueError):
    """Malformed or out-of-range input."""


class NumericError(DomcertError, ArithmeticError):
    """A numerical routine failed to converge or produced garbage."""


class Infeasible(DomcertError):
    """No certificate exists (or none was found) for the posed problem.

    ``detail`` carries whatever diagnostic the raising routine has, e.g. the
    eigenvalue split that contradicted the requested degree.
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class NotFound(Infeasible):
    """A search over rates or gains exhausted its grid without success."""


class InertiaMismatch(DomcertError):
    """The solver returned a storage whose inertia disagrees with the spectrum."""

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


class VaryingOutputNotConvex(InputError):
    """Varying C/D vertices combined with an output weight Q that is not <= 0."""


class BracketInvalid(InputError):
    """Bisection bracket does not straddle the feasibility boundary."""


class CompositionUnsound(DomcertError):
    """Aggregated storage failed to certify the materialized closed loop."""


class AlgebraicLoop(InputError):
    """Both feedthrough terms on a feedback path are nonzero."""


class NotSatisfiable(DomcertError):
    """Small-gain condition cannot be met for the given gains."""


class Divergence(NumericError):
    """Integration produced non-finite states."""

    def __init__(self, message, t_blowup):
        super().__init__(message)
        self.t_blowup = t_blowup
