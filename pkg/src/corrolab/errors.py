"""Exception hierarchy shared by all corrolab modules."""


class CorrolabError(Exception):
    """Base class for every error raised by the package."""


class AssumptionViolated(CorrolabError, ValueError):
    """An a-priori assumption on domain, flux or impedance does not hold.

    ``assumption`` carries the label of the violated condition, e.g. ``"2a"``.
    """

    def __init__(self, message, assumption=None):
        super().__init__(message)
        self.assumption = assumption


class ProfileTooRough(AssumptionViolated):
    pass


class AreaBoundViolated(AssumptionViolated):
    pass


class SigmaBallViolated(AssumptionViolated):
    pass


class IncompatibleDomains(CorrolabError, ValueError):
    pass


class QualityFailure(CorrolabError):
    pass


class FluxesProportional(AssumptionViolated):
    pass


class LowerBoundViolated(AssumptionViolated):
    pass


class EarlyTimeMismatch(AssumptionViolated):
    pass


class SupportViolated(AssumptionViolated):
    pass


class ImpedanceOutOfBounds(AssumptionViolated):
    pass


class SingularSystem(CorrolabError):
    pass


class NonFiniteValue(CorrolabError):
    pass


class WindowOffGrid(CorrolabError, ValueError):
    pass


class IncompatibleTraces(CorrolabError, ValueError):
    pass


class DenominatorTooSmall(CorrolabError):
    pass


class BallNotInterior(CorrolabError, ValueError):
    pass


class NonPositiveField(CorrolabError):
    pass


class GeometryViolation(CorrolabError, ValueError):
    pass


class EmptyIntersection(CorrolabError):
    pass


class InsufficientPoints(CorrolabError):
    pass


class DegenerateFit(CorrolabError):
    pass


class NoMatchedPairs(CorrolabError):
    pass


class LineSearchStalled(CorrolabError):
    pass


class ConfigParseError(CorrolabError):
    """Configuration problem; ``field`` and ``line`` locate it when known."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
