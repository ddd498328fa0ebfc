"""Text tokenization and the input encoders (phonemes, lips, affect, speaker, scene)."""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import EmptyInput, InvalidFeature, MissingFeature, UnknownSpeaker, ValidationError
from .layers import FFTStack, sinusoid_table, zero_masked

SPECIALS = ("<pad>", "<unk>", "<eos>")
PAUSES = ("sil", "sp")
ARPABET = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY",
    "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P",
    "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)
INVENTORY = SPECIALS + PAUSES + ARPABET
SYMBOL_TO_ID = {s: i for i, s in enumerate(INVENTORY)}
PAD, UNK = SYMBOL_TO_ID["<pad>"], SYMBOL_TO_ID["<unk>"]

# Longest match first; a rough letter-to-sound table, not a G2P model.
_DIGRAPHS = {
    "ch": ("CH",), "sh": ("SH",), "th": ("TH",), "ng": ("NG",), "ph": ("F",),
    "zh": ("ZH",), "ee": ("IY",), "ea": ("IY",), "oo": ("UW",), "ou": ("AW",),
    "ow": ("OW",), "oi": ("OY",), "oy": ("OY",), "ai": ("EY",), "ay": ("EY",),
    "er": ("ER",), "ck": ("K",), "qu": ("K", "W"),
}
_LETTERS = {
    "a": ("AH",), "b": ("B",), "c": ("K",), "d": ("D",), "e": ("EH",), "f": ("F",),
    "g": ("G",), "h": ("HH",), "i": ("IH",), "j": ("JH",), "k": ("K",), "l": ("L",),
    "m": ("M",), "n": ("N",), "o": ("AO",), "p": ("P",), "q": ("K",), "r": ("R",),
    "s": ("S",), "t": ("T",), "u": ("UH",), "v": ("V",), "w": ("W",), "x": ("K", "S"),
    "y": ("Y",), "z": ("Z",),
}
_PUNCT = set(",.;:!?-\"'()")


@dataclass
class PhonemeSequence:
    tokens: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.tokens.shape != self.mask.shape or self.tokens.ndim != 1:
            raise ValidationError("tokens and mask must be 1-D and equally long")
        if np.any(self.tokens < 0) or np.any(self.tokens >= len(INVENTORY)):
            raise ValidationError("token id outside the inventory")
        if not self.mask.any():
            raise ValidationError("phoneme sequence needs at least one valid token")

    @property
    def symbols(self):
        return [INVENTORY[t] for t in self.tokens]

    def __len__(self):
        return len(self.tokens)


def text_to_symbols(text):
    text = text.strip().lower()
    if not text:
        raise EmptyInput("cannot tokenize empty text")
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            if out and out[-1] not in PAUSES:
                out.append("sil")
            i += 1
        elif ch in _PUNCT:
            if out and out[-1] == "sil":
                out[-1] = "sp"
            elif not out or out[-1] != "sp":
                out.append("sp")
            i += 1
        elif text[i:i + 2] in _DIGRAPHS:
            out.extend(_DIGRAPHS[text[i:i + 2]])
            i += 2
        elif ch in _LETTERS:
            out.extend(_LETTERS[ch])
            i += 1
        else:
            out.append("<unk>")
            i += 1
    while out and out[-1] == "sil":
        out.pop()
    if not out:
        raise EmptyInput(f"no symbols produced for {text!r}")
    return out


def symbols_to_sequence(symbols):
    ids = [SYMBOL_TO_ID.get(s, UNK) for s in symbols]
    return PhonemeSequence(np.array(ids), np.ones(len(ids), dtype=bool))


def tokenize(text):
    """Map text onto the fixed 44-symbol inventory; unknown characters become ``<unk>``."""
    return symbols_to_sequence(text_to_symbols(text))


class PhonemeEncoder(nn.Module):
    def __init__(self, d_model, n_blocks, n_heads, ffn_hidden, kernel_size, dropout):
        super().__init__()
        self.embed = nn.Embedding(len(INVENTORY), d_model, padding_idx=PAD)
        self.stack = FFTStack(n_blocks, d_model, n_heads, ffn_hidden, kernel_size, dropout)

    def forward(self, tokens, mask):
        return zero_masked(self.stack(self.embed(tokens), mask), mask)


class LipEncoder(nn.Module):
    """3D-conv stem over mouth crops, spatial average, linear lift, FFT blocks.

    Input is (B, T_v, W, H, C) as stored on disk.
    """

    def __init__(self, d_model, n_blocks, n_heads, ffn_hidden, kernel_size, dropout,
                 in_channels=1, channels=(32, 64)):
        super().__init__()
        c1, c2 = channels
        self.conv1 = nn.Conv3d(in_channels, c1, (3, 5, 5), stride=(1, 2, 2), padding=(1, 2, 2))
        self.conv2 = nn.Conv3d(c1, c2, (3, 3, 3), stride=(1, 2, 2), padding=(1, 1, 1))
        self.proj = nn.Linear(c2, d_model)
        self.stack = FFTStack(n_blocks, d_model, n_heads, ffn_hidden, kernel_size, dropout)

    def stem(self, lips, mask):
        if not torch.isfinite(lips).all():
            raise InvalidFeature("lip patches contain non-finite values")
        frame_mask = mask.to(lips.dtype)[:, None, :, None, None]
        x = lips.permute(0, 4, 1, 3, 2) * frame_mask  # (B, C, T, H, W)
        x = F.relu(self.conv1(x)) * frame_mask
        x = F.relu(self.conv2(x)) * frame_mask
        return self.proj(x.mean(dim=(3, 4)).transpose(1, 2))

    def forward(self, lips, mask):
        return zero_masked(self.stack(zero_masked(self.stem(lips, mask), mask), mask), mask)


def check_affect(values, name):
    if values is None:
        raise MissingFeature(f"{name} track is missing")
    if not torch.isfinite(values).all():
        raise InvalidFeature(f"{name} track contains non-finite values")
    if (values.abs() > 1.0).any():
        raise ValidationError(f"{name} values must lie in [-1, 1]")


class FaceAffectEncoder(nn.Module):
    """Trainable stand-in for a pretrained face-affect network.

    One 7x7 stride-2 convolution, three 3x3 conv blocks with 2x2 average
    pooling, a global average, then a linear map to the two affect streams.
    """

    def __init__(self, d_model, in_channels=1, channels=32):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, channels, 7, stride=2, padding=3)
        self.blocks = nn.ModuleList(nn.Conv2d(channels, channels, 3, padding=1) for _ in range(3))
        self.out = nn.Linear(channels, 2 * d_model)

    def forward(self, faces):
        b, t, w, h, c = faces.shape
        x = faces.reshape(b * t, w, h, c).permute(0, 3, 2, 1)
        x = F.relu(self.conv(x))
        for conv in self.blocks:
            x = F.relu(conv(x))
            if min(x.shape[-2:]) >= 2:
                x = F.avg_pool2d(x, 2)
        x = self.out(x.mean(dim=(2, 3))).view(b, t, -1)
        return x.chunk(2, dim=-1)


class AffectEncoder(nn.Module):
    """Valence and arousal streams of width ``d_model``.

    ``source="va"`` lifts ingested per-frame scalars with one learned linear map
    each; ``source="face_features"`` runs :class:`FaceAffectEncoder` on face crops.
    Sinusoidal positions are added in both cases.
    """

    def __init__(self, d_model, source="va", in_channels=1, face_channels=32):
        super().__init__()
        self.d_model = d_model
        self.source = source
        self.valence_lift = nn.Linear(1, d_model)
        self.arousal_lift = nn.Linear(1, d_model)
        self.face = FaceAffectEncoder(d_model, in_channels, face_channels) if source == "face_features" else None

    def lift(self, valence, arousal):
        check_affect(valence, "valence")
        check_affect(arousal, "arousal")
        return self.valence_lift(valence.unsqueeze(-1)), self.arousal_lift(arousal.unsqueeze(-1))

    def forward(self, mask, valence=None, arousal=None, faces=None):
        if self.source == "va":
            v, a = self.lift(valence, arousal)
        else:
            if faces is None:
                raise MissingFeature("face crops required for affect_source=face_features")
            v, a = self.face(faces)
        pos = sinusoid_table(mask.shape[1], self.d_model, v.dtype, v.device)[None]
        return zero_masked(v + pos, mask), zero_masked(a + pos, mask)


class SpeakerEncoder(nn.Module):
    """Trainable speaker table; rows (or external vectors) are L2-normalized."""

    def __init__(self, n_speakers, d_model):
        super().__init__()
        self.n_speakers = n_speakers
        self.table = nn.Embedding(n_speakers, d_model)

    def forward(self, speaker_ids, external=None):
        if external is not None:
            if not torch.isfinite(external).all():
                raise InvalidFeature("speaker vector contains non-finite values")
            vec = external
        else:
            ids = torch.as_tensor(speaker_ids)
            if (ids < 0).any() or (ids >= self.n_speakers).any():
                raise UnknownSpeaker(f"speaker id outside [0, {self.n_speakers}): {ids.tolist()}")
            vec = self.table(ids)
        return F.normalize(vec, dim=-1, eps=1e-12)


class SceneProjector(nn.Module):
    def __init__(self, scene_dim, d_model):
        super().__init__()
        self.proj = nn.Linear(scene_dim, d_model)

    def forward(self, scene, mask):
        if scene.shape[1] == 0:
            raise MissingFeature("empty scene sequence")
        if not torch.isfinite(scene).all():
            raise InvalidFeature("scene features contain non-finite values")
        return zero_masked(self.proj(scene), mask)
