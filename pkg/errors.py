"""
Exception hierarchy shared by the simulation and theory modules.
"""


class RoyalRoadError(Exception):
    """Base class for every error raised by this project."""


class InvalidInputError(RoyalRoadError, ValueError):
    """A parameter, genome or state violates its documented constraints."""


class ApproximationDomainError(InvalidInputError):
    """An approximate formula was asked for outside mu >= 2, M >= 4."""


class DegenerateParameterError(RoyalRoadError, ZeroDivisionError):
    """A formula divides by a quantity that vanishes for these parameters."""


class DivergentExpectationError(RoyalRoadError, ArithmeticError):
    """A geometric waiting stage has zero success probability."""


class NumericFailureError(RoyalRoadError, ArithmeticError):
    """A numerical routine did not reach its tolerance."""
