"""Exception types raised across the package."""


class GrowthGapError(Exception):
    """Base class for all package errors."""


class DomainError(GrowthGapError, ValueError):
    """An argument lies outside the domain of the operation."""


class InvalidModulusError(GrowthGapError, ValueError):
    """A modulus of continuity violates a structural requirement."""


class ConstructionError(GrowthGapError, RuntimeError):
    """A diffeomorphism could not be built or certified."""


class InvalidDiffeoError(GrowthGapError, RuntimeError):
    """A map stopped behaving like an orientation-preserving diffeomorphism."""


class SingularIntegralError(GrowthGapError, ArithmeticError):
    """The displacement vanishes inside an integration range."""


class SpecError(GrowthGapError, ValueError):
    """A bound, scenario or paste specification is incomplete or inconsistent."""
