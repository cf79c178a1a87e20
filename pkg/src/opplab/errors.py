"""Exception taxonomy shared by all modules.

Exit-code mapping used by the CLI: precondition and input problems exit
with 2, exhausted enumeration/sampling budgets with 3.
"""


class OpplabError(Exception):
    exit_code = 2


class NotSymmetric(OpplabError):
    pass


class DegenerateForm(OpplabError):
    pass


class MethodUnavailable(OpplabError):
    pass


class ZeroVolume(OpplabError):
    pass


class DivergentIntegral(OpplabError):
    pass


class NumericalBreakdown(OpplabError):
    pass


class RationalDegenerate(OpplabError):
    """Diophantine-type fit hit an (effectively) rational form."""


class NotFoundWithinCap(OpplabError):
    pass


class NoResonance(OpplabError):
    pass


class MissingCalibration(OpplabError):
    pass


class BudgetError(OpplabError):
    exit_code = 3


class BoxTooLarge(BudgetError):
    pass


class BudgetExceeded(BudgetError):
    pass
