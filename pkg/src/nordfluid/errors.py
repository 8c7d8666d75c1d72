"""Exception types shared across the package."""


class NordfluidError(Exception):
    """Base class for every error raised by this package."""


# eos
class GammaOutOfRange(NordfluidError, ValueError):
    pass


class NonIncreasingCoefficient(NordfluidError, ValueError):
    pass


class NegativeDensity(NordfluidError, ValueError):
    pass


class NegativePressure(NordfluidError, ValueError):
    pass


# state / system / energy
class InadmissibleState(NordfluidError, ValueError):
    pass


class NormalizationViolated(NordfluidError, ValueError):
    pass


class NoBracket(NordfluidError, RuntimeError):
    pass


class GridMismatch(NordfluidError, ValueError):
    pass


class OrderTooHigh(NordfluidError, ValueError):
    pass


# geometry
class SoundSpeedDegenerate(NordfluidError, ValueError):
    pass


class ParallelDirections(NordfluidError, ValueError):
    pass


class BoxTouchesBoundary(NordfluidError, ValueError):
    pass


# field
class NonPeriodicUnsupported(NordfluidError, ValueError):
    pass


class RadiusTooLarge(NordfluidError, ValueError):
    pass


class HypothesisViolated(NordfluidError, ValueError):
    pass


# solver
class EscapedBox(NordfluidError, RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class CflViolated(NordfluidError, ValueError):
    pass


class TubeExceeded(NordfluidError, RuntimeError):
    def __init__(self, message, m=None):
        super().__init__(message)
        self.m = m


class ConeTooSmall(NordfluidError, ValueError):
    pass


# cli
class UnknownScenario(NordfluidError, KeyError):
    pass


class InvalidConfig(NordfluidError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
