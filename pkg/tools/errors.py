class LaxMarkovError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(LaxMarkovError, ValueError):
    pass


class DuplicateNodesError(ConfigError):
    pass


class BadIntervalError(ConfigError):
    pass


class ProfileError(ConfigError):
    pass


class DimensionMismatchError(LaxMarkovError, ValueError):
    pass


class NotDiagonalError(LaxMarkovError, ValueError):
    pass


class SizeCapExceededError(LaxMarkovError, ValueError):
    pass


class ZeroElementError(LaxMarkovError, ValueError):
    pass


class TopNotIdentityError(LaxMarkovError, ValueError):
    pass


class DegreeNotDivisibleError(LaxMarkovError, ValueError):
    pass


class TruncationTooSmallError(LaxMarkovError, ValueError):
    pass


class DegreeChangedError(LaxMarkovError, ValueError):
    pass


class NumericalError(LaxMarkovError, ArithmeticError):
    pass


class StepSizeUnderflowError(NumericalError):
    def __init__(self, t_reached: float, message: str = "step size underflow"):
        super().__init__(f"{message} (t reached: {t_reached:.17g})")
        self.t_reached = t_reached
