"""Exception hierarchy.

Every error carries a machine-readable payload and the CLI exit code it maps
to: 1 for validated rejections, 2 for malformed input or numerical failure.
"""


class HesseFlatError(Exception):
    exit_code = 2

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def payload(self):
        return {"error": type(self).__name__, "message": self.message,
                "details": self.details}


class RejectedError(HesseFlatError):
    """Input was well formed but failed a mathematical validator."""
    exit_code = 1


# -- expressions ------------------------------------------------------------

class ParseError(HesseFlatError):
    def __init__(self, message, offset, expected=None):
        super().__init__(message, offset=offset, expected=expected)
        self.offset = offset
        self.expected = expected


class UnknownIdentifier(ParseError):
    pass


class DomainError(HesseFlatError):
    def __init__(self, message, subexpr=None, point=None):
        super().__init__(message, subexpr=subexpr, point=point)
        self.subexpr = subexpr
        self.point = point


# -- grids and fields ---------------------------------------------------------

class GridError(HesseFlatError):
    pass


class OutsideDomain(HesseFlatError):
    pass


class NotPositiveDefinite(RejectedError):
    pass


class NotRadiallySymmetric(RejectedError):
    pass


class NotFlat(RejectedError):
    pass


# -- pipeline -----------------------------------------------------------------

class EmptyAdmissibleInterval(RejectedError):
    pass


class OutsideInterval(HesseFlatError):
    pass


class NegativeDiscriminant(HesseFlatError):
    pass


class PhaseSingularity(RejectedError):
    pass


class MonotonicityViolation(HesseFlatError):
    pass


class NumericalBlowup(HesseFlatError):
    pass


class InconsistentGrid(HesseFlatError):
    pass


# -- chart ----------------------------------------------------------------------

class NotClosed(RejectedError):
    pass


class SingularJacobian(RejectedError):
    pass


class PositivityViolation(RejectedError):
    pass


class OutsideChart(RejectedError):
    pass


class NewtonDivergence(HesseFlatError):
    pass


class NotStarShaped(RejectedError):
    pass


class VerificationFailed(RejectedError):
    pass
