"""Exception hierarchy shared by all modules.

Numerical failures derive from :class:`NumericalError`; bad inputs derive
from :class:`InputError`. The CLI maps the two families to distinct exit
codes.
"""


class WMFError(Exception):
    """Base class for every error raised by this package."""


class InputError(WMFError, ValueError):
    pass


class NumericalError(WMFError, ArithmeticError):
    pass


class NonFiniteInput(InputError):
    pass


class SingularDesign(NumericalError):
    pass


class DegenerateStep(NumericalError):
    pass


class NotOrthogonal(InputError):
    pass


class NoConvergence(NumericalError):
    pass


class EmptyTable(InputError):
    pass


class FoldTooSmall(InputError):
    pass


class NonPositiveSigma(NumericalError):
    pass


class UnknownCriterion(InputError):
    pass


class Separation(NumericalError):
    """Logistic coefficients diverged: the classes are (quasi-)separable."""


class ConstantColumn(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyFile(InputError):
    pass


class NonFiniteValue(ParseError):
    pass
