"""Exception hierarchy shared by all modules."""


class SpinGaugeError(Exception):
    """Base class for every error raised by this package."""


class NumericalFailure(SpinGaugeError):
    """A computation produced unusable numbers."""


class DegenerateVector(NumericalFailure, ValueError):
    pass


class DegenerateFrame(NumericalFailure):
    pass


class FrameDrift(NumericalFailure):
    pass


class NonFinite(NumericalFailure, FloatingPointError):
    pass


class UnstableTimeStep(NumericalFailure, ValueError):
    pass


class ShapeMismatch(SpinGaugeError, ValueError):
    pass


class GridMismatch(ShapeMismatch):
    pass


class MisalignedTime(SpinGaugeError, ValueError):
    pass


class EmptyHistory(SpinGaugeError, ValueError):
    pass


class TooFewSnapshots(SpinGaugeError, ValueError):
    pass


class WrongSignature(SpinGaugeError, ValueError):
    pass


class IncompatibleSymmetry(SpinGaugeError, ValueError):
    pass


class InvalidParams(SpinGaugeError, ValueError):
    pass


class ConfigError(SpinGaugeError, ValueError):
    pass
