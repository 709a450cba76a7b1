class TrackingError(Exception):
    """Base class for all errors raised by the tracking library."""


class InvalidBoxError(TrackingError, ValueError):
    pass


class ShapeError(TrackingError, ValueError):
    pass


class ParameterError(TrackingError, ValueError):
    pass


class SingularSystemError(TrackingError, ArithmeticError):
    pass


class SynchronizationError(TrackingError):
    pass


class AlignmentError(TrackingError, ValueError):
    pass


class InvalidWeightsError(TrackingError, ValueError):
    pass


class DatasetError(TrackingError):
    """Malformed or inconsistent on-disk data. Message names the file and line."""
