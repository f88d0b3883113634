"""Exception types raised by skillflow."""


class SkillflowError(Exception):
    """Base class for all numeric/domain errors raised by the package."""


class DomainError(SkillflowError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class DegenerateParams(SkillflowError, ValueError):
    """Parameters for which the interior saddle (or its analysis) is undefined."""


class StepTooLarge(SkillflowError, ArithmeticError):
    """An integration step pushed the state out of the unit square by more than the clamp tolerance."""


class NonFinite(SkillflowError, ArithmeticError):
    """The drift evaluated to NaN or infinity."""


class ManifoldEscape(SkillflowError, RuntimeError):
    """Backward orbits from the saddle did not reach the expected corners."""


class SingularPasting(SkillflowError, ArithmeticError):
    """A power-law exponent equals 1, where the breakpoint formulas divide by zero."""


class EmptyData(SkillflowError, ValueError):
    """Not enough usable session records for an estimator."""


class Degenerate(SkillflowError, ValueError):
    """Every candidate step of an estimator had a zero denominator."""


class Unresolved(SkillflowError, RuntimeError):
    """A computation did not settle before its time horizon."""


class UnsupportedVariant(SkillflowError, ValueError):
    """The operation has no closed form for this model variant."""
