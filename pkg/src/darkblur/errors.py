"""Exception types shared across the package."""


class DarkblurError(Exception):
    """Base class for all errors raised by darkblur."""


class DomainError(DarkblurError):
    """An image carried the wrong domain tag for the requested operation."""


class ShapeError(DarkblurError):
    """Array shapes are inconsistent with the operation's contract."""


class ValidationError(DarkblurError):
    """A value is outside its documented range."""


class ConfigError(DarkblurError):
    """Configuration is malformed or internally inconsistent."""


class InsufficientFramesError(DarkblurError):
    """A frame sequence is too short for the requested operation."""


class UnreachableExposureError(DarkblurError):
    """The requested target exposure cannot be reached by darkening alone.

    Carries ``achievable_min``, the lowest mean luminance the curve family
    can produce for this image at the configured iteration count.
    """

    def __init__(self, message: str, achievable_min: float):
        super().__init__(message)
        self.achievable_min = achievable_min


class TrainingDivergedError(DarkblurError):
    """A NaN gradient appeared during training; names the offending tensor."""

    def __init__(self, message: str, param_name: str | None = None):
        super().__init__(message)
        self.param_name = param_name
