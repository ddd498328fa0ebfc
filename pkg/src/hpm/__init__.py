"""Expressive visual voice cloning for movie dubbing.

Lip-synchronized phoneme expansion, affect-driven prosody prediction and a
scene-conditioned emotion head feeding a FastSpeech-style mel generator.
"""

__version__ = "0.1.0"

from .config import Config, load as load_config
from .errors import (EmptyInput, HPMError, InvalidAudio, InvalidConfig, InvalidFeature,
                     InvalidLabel, MissingFeature, MissingModel, ShapeError, TrainingDiverged,
                     UnknownSpeaker, ValidationError)
from .kernels import BACKEND as KERNEL_BACKEND
from .model import DubbingModel, build_model

__all__ = [
    "Config", "load_config", "DubbingModel", "build_model", "KERNEL_BACKEND", "__version__",
    "HPMError", "ValidationError", "EmptyInput", "InvalidFeature", "MissingFeature",
    "UnknownSpeaker", "InvalidLabel", "InvalidAudio", "InvalidConfig", "ShapeError",
    "MissingModel", "TrainingDiverged",
]
