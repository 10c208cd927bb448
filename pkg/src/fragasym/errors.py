"""Exception and warning types.

Validation-type errors (bad input, wrong domain) map to CLI exit code 1,
numerical failures map to exit code 2.
"""


class FragasymError(Exception):
    """Base class for all package errors."""


class ValidationError(FragasymError):
    """Input does not satisfy a stated precondition."""


class NumericalError(FragasymError):
    """A numerical procedure failed to reach its target."""


class DomainError(ValidationError):
    """Argument lies outside the region where the quantity is defined."""


class PoleError(DomainError):
    """Evaluation requested too close to a pole."""


class RangeError(DomainError):
    """Point falls outside the range covered by an evaluator."""


class MissingTailError(ValidationError):
    """Asymptotic regime needs tail coefficients the datum does not carry."""


class ConditionHError(ValidationError):
    """Kernel atoms do not satisfy the commensurability condition."""


class StabilityError(ValidationError):
    """Time step violates the explicit scheme's stability bound."""


class QuadratureError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class ContractionError(NumericalError):
    pass


class BracketError(NumericalError):
    """No sign change found while growing a root bracket."""


# region analysis uses the longer name
RootBracketError = BracketError


class PrecisionError(NumericalError):
    """Rationality test is ambiguous at the working tolerance."""


class EstimationError(NumericalError):
    pass


class ConditioningWarning(UserWarning):
    pass


class SupportOverflowWarning(UserWarning):
    pass


class BoundaryRegimeWarning(UserWarning):
    pass


class SmoothnessWarning(UserWarning):
    pass
