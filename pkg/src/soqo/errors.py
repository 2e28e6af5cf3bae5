"""Exception hierarchy shared by every soqo module."""


class SoqoError(Exception):
    """Base class for all errors raised by soqo."""


class NotSymmetric(SoqoError, ValueError):
    pass


class NotPositiveDefinite(SoqoError, ValueError):
    pass


class RangeViolation(SoqoError, ValueError):
    pass


class GammaOutOfRange(SoqoError, ValueError):
    pass


class EigvalOutOfRange(SoqoError, ValueError):
    pass


class DimensionMismatch(SoqoError, ValueError):
    pass


class HorizonMismatch(SoqoError, ValueError):
    pass


class NotScalarMatrix(SoqoError, ValueError):
    pass


class SolveFailure(SoqoError, RuntimeError):
    pass


class InvalidParameter(SoqoError, ValueError):
    pass


class HorizonTooLarge(SoqoError, ValueError):
    pass


class ConfigError(SoqoError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class EmptyInput(SoqoError, ValueError):
    pass
