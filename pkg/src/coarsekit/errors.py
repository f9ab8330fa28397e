"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for usage problems, 3 for numerical failures, 4 for IO.
"""


class CoarseKitError(Exception):
    exit_code = 3


class UsageError(CoarseKitError):
    exit_code = 2


class InvalidGeometry(UsageError):
    pass


class DimensionMismatch(UsageError):
    pass


class EmptyInput(UsageError):
    pass


class TooLargeForDense(UsageError):
    pass


class ScopeError(CoarseKitError):
    pass


class GaugeFormatError(CoarseKitError):
    exit_code = 4


class NumericalError(CoarseKitError):
    exit_code = 3


class SingularSelfCoupling(NumericalError):
    pass


class SingularBlock(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class EigNotConverged(NumericalError):
    pass


class GeneralizedEigSingularB(NumericalError):
    pass


class HarmonicRitzSingular(NumericalError):
    pass


class ZeroVector(NumericalError):
    pass


class RecycleUpdateFailed(NumericalError):
    pass


class NegativeNormBreakdown(NumericalError):
    """Pipelined norm rearrangement produced ``t < 0``.

    ``x`` holds the best iterate available when the breakdown hit and
    ``report`` the partial solve report.
    """

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report
