"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`UltraparError` so that
callers (the CLI in particular) can map failure classes onto exit codes.
"""


class UltraparError(Exception):
    """Base class for all toolkit errors."""


class StructureError(UltraparError, ValueError):
    pass


class NonIncreasingRanks(StructureError):
    pass


class RankDeficientBlock(StructureError):
    pass


class EllipticityViolation(StructureError):
    pass


class ShapeMismatch(StructureError):
    pass


class NonPositiveLambda(UltraparError, ValueError):
    pass


class NonPositiveRadius(UltraparError, ValueError):
    pass


class NonPositiveTime(UltraparError, ValueError):
    pass


class NonPositiveHorizon(UltraparError, ValueError):
    pass


class SingularCovariance(UltraparError, ArithmeticError):
    pass


class EmptyGrid(UltraparError, ValueError):
    pass


class GridTooSmall(UltraparError, ValueError):
    pass


class EmptyIntersection(UltraparError, ValueError):
    pass


class EmptyFamily(UltraparError, ValueError):
    pass


class CFLViolation(UltraparError, ValueError):
    pass


class ImplicitSolveDiverged(UltraparError, ArithmeticError):
    pass


class SupportViolation(UltraparError, ValueError):
    pass


class GeometryOutOfDomain(UltraparError, ValueError):
    pass


class DegenerateLadder(UltraparError, ValueError):
    pass


class BadLambda(UltraparError, ValueError):
    pass


class ConfigParse(UltraparError, ValueError):
    pass


class UnknownCheck(UltraparError, KeyError):
    def __str__(self):
        return Exception.__str__(self)
