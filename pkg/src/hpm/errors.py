"""Exception hierarchy shared across the package."""


class HPMError(Exception):
    """Base class for every error raised by hpm."""


class ValidationError(HPMError, ValueError):
    pass


class EmptyInput(ValidationError):
    pass


class InvalidFeature(ValidationError):
    pass


class MissingFeature(ValidationError):
    pass


class UnknownSpeaker(ValidationError, KeyError):
    pass


class InvalidLabel(ValidationError):
    pass


class InvalidAudio(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class MissingModel(HPMError, FileNotFoundError):
    pass


class TrainingDiverged(HPMError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}
