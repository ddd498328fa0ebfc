"""Scene atmosphere: prosody/scene cross attention and the clip emotion head."""

from dataclasses import dataclass
import math

import numpy as np
import torch
import torch.nn as nn

from .errors import InvalidFeature, MissingFeature, ShapeError
from .layers import masked_softmax, zero_masked

EMOTIONS = ("angry", "disgust", "fear", "happy", "neutral", "sad", "surprise", "others")


@dataclass
class EmotionPrediction:
    logits: np.ndarray

    @property
    def probabilities(self):
        z = self.logits - self.logits.max()
        e = np.exp(z)
        return e / e.sum()

    @property
    def label(self):
        return int(np.argmax(self.logits))


class SceneFusion(nn.Module):
    """Prosody frames (projected to width d) attend over scene rows.

    Default: values are the scene rows.  ``strict=True`` uses the projected
    prosody itself as values, which only type-checks when T_s == T_y.
    """

    def __init__(self, d_model, prosody_width, strict=False):
        super().__init__()
        self.d_model = d_model
        self.strict = strict
        self.query = nn.Linear(prosody_width, d_model)

    def forward(self, prosody, scene, scene_mask=None, mel_mask=None):
        if scene.shape[1] == 0:
            raise MissingFeature("scene sequence is empty")
        if not (torch.isfinite(prosody).all() and torch.isfinite(scene).all()):
            raise InvalidFeature("non-finite input to scene fusion")
        if scene.shape[-1] != self.d_model:
            raise ShapeError(f"scene width {scene.shape[-1]} != {self.d_model}")
        q = self.query(prosody)
        weights = masked_softmax(q @ scene.transpose(1, 2) / math.sqrt(self.d_model), scene_mask)
        if self.strict:
            if scene.shape[1] != prosody.shape[1]:
                raise ShapeError(f"strict scene attention needs T_s == T_y, got {scene.shape[1]} vs {prosody.shape[1]}")
            values = q
        else:
            values = scene
        return zero_masked(weights @ values, mel_mask), weights


class EmotionHead(nn.Module):
    """Per-frame linear logits followed by a max over valid frames."""

    def __init__(self, d_model, n_emotions=8):
        super().__init__()
        self.linear = nn.Linear(d_model, n_emotions)

    def frame_logits(self, x):
        return self.linear(x)

    def forward(self, x, mask=None):
        logits = self.linear(x)
        if mask is not None:
            logits = logits.masked_fill(~mask[..., None], float("-inf"))
        return logits.max(dim=1).values


class AtmosphereBooster(nn.Module):
    def __init__(self, d_model, n_emotions=8, enabled=True, strict=False):
        super().__init__()
        self.enabled = enabled
        if enabled:
            self.fusion = SceneFusion(d_model, 2 * d_model, strict)
            self.head = EmotionHead(d_model, n_emotions)
        else:
            self.bypass = nn.Linear(2 * d_model, d_model)

    def forward(self, prosody, scene, scene_mask, mel_mask):
        if not self.enabled:
            return {"emotion_hidden": zero_masked(self.bypass(prosody), mel_mask),
                    "emotion_logits": None, "scene_weights": None}
        if self.fusion.strict and scene.shape[1] != prosody.shape[1]:
            idx = torch.div(torch.arange(prosody.shape[1], device=scene.device) * scene.shape[1],
                            prosody.shape[1], rounding_mode="floor")
            scene, scene_mask = scene[:, idx], None if scene_mask is None else scene_mask[:, idx]
        hidden, weights = self.fusion(prosody, scene, scene_mask, mel_mask)
        return {"emotion_hidden": hidden, "emotion_logits": self.head(hidden, mel_mask),
                "scene_weights": weights}
