"""Exception hierarchy shared by all modules."""


class TubecertError(Exception):
    """Base class for every error raised by the package."""


class InputShapeError(TubecertError, ValueError):
    pass


class NumericalError(TubecertError, ArithmeticError):
    pass


class UnsupportedActivationError(TubecertError):
    """Raised when second-order quantities are requested on a ReLU network."""


class ClassIndexError(TubecertError, IndexError):
    pass


class StationaryPointError(TubecertError):
    """Gradient norm below the floor; the boundary direction is undefined here."""


class RootFindingError(TubecertError):
    pass


class NoSignChange(RootFindingError):
    """No probe point with a negative value was found within the attempt budget."""


class BadBracketError(RootFindingError):
    pass


class DerivativeVanishedError(RootFindingError):
    pass


class ConfigError(TubecertError, ValueError):
    pass


class PreconditionError(TubecertError, ValueError):
    """The sample is not classified with the requested label."""


class InvalidEstimateError(TubecertError):
    pass


class OracleFailure(TubecertError):
    pass


class BoundaryNotFound(TubecertError):
    pass


class EmptyDatasetError(TubecertError, ValueError):
    pass


class RegionSamplingError(TubecertError, ValueError):
    pass


class TrainingError(TubecertError):
    pass


class ModelFormatError(TubecertError, ValueError):
    pass
