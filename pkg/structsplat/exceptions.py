class InvalidImageError(ValueError):
    """
    Raised when an image file or buffer cannot be used: malformed files,
    unsupported channel counts, non-finite samples, or images below the
    analysis size floor.
    """

    pass


class DimensionMismatch(ValueError):
    """
    Raised when two images or tensor fields that must line up pixel for pixel
    have different shapes.
    """

    pass


class InvalidConfigError(ValueError):
    """
    Raised when a configuration value or file is invalid, including unknown
    keys.
    """

    pass


class MalformedSceneError(ValueError):
    """
    Raised when a Gaussian or camera list in the line-oriented text format
    cannot be parsed.
    """

    pass


class BehindCamera(ValueError):
    """
    Raised when a camera-space point sits at or behind the near plane, where
    the pinhole projection is undefined.
    """

    pass


class TrainingDiverged(ArithmeticError):
    """
    Raised when the training loss stops being finite.
    """

    def __init__(self, message, iteration=None, dump_path=None):
        super().__init__(message)
        self.iteration = iteration
        self.dump_path = dump_path


class ReportError(Exception):
    """
    Raised when a run directory holds no training reports, or reports with
    inconsistent schemas.
    """

    pass
