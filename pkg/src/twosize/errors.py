"""Exception hierarchy shared by all modules."""


class TwoSizeError(Exception):
    """Base class for every error raised by the toolkit."""


class OutOfRange(TwoSizeError, ValueError):
    """A sampling probability left [0, 1] for the given parameters."""


class BoundaryViolation(TwoSizeError, ValueError):
    pass


class BoundarySign(TwoSizeError, ValueError):
    pass


class StateSpaceTooLarge(TwoSizeError):
    pass


class DivisionAtBoundary(TwoSizeError, ZeroDivisionError):
    pass


class InvalidStep(TwoSizeError, ValueError):
    pass


class NonAbsorbing(TwoSizeError, ValueError):
    pass


class UnsupportedOrder(TwoSizeError, ValueError):
    pass


class QuadratureFailure(TwoSizeError, ArithmeticError):
    pass


class NonIntegrable(TwoSizeError, ValueError):
    pass


class ConfigError(TwoSizeError, ValueError):
    pass
