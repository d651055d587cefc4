"""Exception hierarchy shared by every module of the package."""


class AnisomultError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AnisomultError, ValueError):
    pass


class InvalidPointError(InvalidArgumentError):
    pass


class InvalidPairError(InvalidArgumentError):
    pass


class InvalidExponentError(InvalidArgumentError):
    pass


class ProfileViolationError(AnisomultError):
    """A weight or order function returned a value outside its declared range."""


class AssumptionFailure(AnisomultError):
    """The sublevel-set structure hypotheses fail empirically at a probe point."""


class CertificationImpossible(AnisomultError):
    pass


class EvaluationImpossible(AnisomultError):
    pass


class PreconditionViolation(AnisomultError):
    pass


class ResolutionError(AnisomultError):
    pass


class RefinementError(ResolutionError):
    """Doubling the quadrature resolution moved the value by more than tolerance."""


class ConstructionFailure(AnisomultError):
    pass


class InvariantViolation(AnisomultError):
    pass


class EvaluationInconsistency(AnisomultError):
    pass


class SynthesisFailure(AnisomultError):
    pass


class ConfigurationError(AnisomultError, ValueError):
    pass


class AliasingError(AnisomultError):
    pass


class DiscretizationInconsistency(AnisomultError):
    pass


class NoDataError(AnisomultError):
    pass


class ValidationError(ConfigurationError):
    """Scenario configuration failed validation; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
