"""Mel-cepstral distortion with and without warping, plus classifier accuracy.

Cepstra are the orthonormal DCT-II of the natural-log mel magnitudes,
coefficients 1..13 (c0, the overall level, is dropped).  Distances use the
usual constant ``(10 / ln 10) * sqrt(2)`` so one unit of difference in a
single coefficient costs about 6.14 dB.
"""

from dataclasses import asdict, dataclass
import math
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.fft import dct
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import formats, kernels
from .audio import MelSpectrogram
from .errors import EmptyInput, InvalidLabel, MissingModel, ShapeError, ValidationError

MCD_SCALE = 10.0 / math.log(10.0) * math.sqrt(2.0)
N_CEPSTRA = 13
DB_TO_LN = math.log(10.0) / 20.0


def to_cepstra(mel, n_coeffs=N_CEPSTRA):
    """T x n_mels dB mel (or :class:`MelSpectrogram`) -> T x n_coeffs cepstra."""
    frames = mel.frames if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError(f"expected a T x n_mels matrix, got shape {frames.shape}")
    if frames.shape[1] <= n_coeffs:
        raise ShapeError(f"need more than {n_coeffs} mel bins, got {frames.shape[1]}")
    if not np.all(np.isfinite(frames)):
        raise ValidationError("mel contains non-finite values")
    return dct(frames * DB_TO_LN, type=2, norm="ortho", axis=1)[:, 1:n_coeffs + 1]


def _check_pair(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"cepstra shapes {a.shape} and {b.shape} are incompatible")
    if len(a) == 0 or len(b) == 0:
        raise EmptyInput("cepstral sequences must be non-empty")
    return a, b


def frame_distances(a, b):
    """Pairwise per-frame MCD terms, shape (T_a, T_b)."""
    a, b = _check_pair(a, b)
    diff = a[:, None, :] - b[None, :, :]
    return MCD_SCALE * np.sqrt(np.sum(diff * diff, axis=-1))


def mcd(a, b):
    a, b = _check_pair(a, b)
    if len(a) != len(b):
        raise ShapeError(f"mcd needs equal lengths ({len(a)} vs {len(b)}); use mcd_dtw")
    return float(MCD_SCALE * np.mean(np.sqrt(np.sum((a - b) ** 2, axis=1))))


def mcd_dtw(a, b):
    """Minimum-cost monotone alignment; returns (mean cost along the path, path).

    The path starts at (0, 0), ends at (T_a-1, T_b-1) and moves by
    (1,0), (0,1) or (1,1).  The path minimizing the summed cost is chosen and
    its cost is averaged over its length.
    """
    cost = frame_distances(a, b)
    acc = kernels.dtw_accumulate(cost)
    path = kernels.dtw_backtrack(acc)
    return float(acc[-1, -1] / len(path)), path


def length_ratio(n_a, n_b):
    return max(n_a, n_b) / min(n_a, n_b)


def mcd_dtw_sl(a, b, coefficient=length_ratio):
    """:func:`mcd_dtw` scaled by a length penalty (max/min length by default)."""
    value, _ = mcd_dtw(a, b)
    return value * coefficient(len(a), len(b))


@dataclass
class MetricReport:
    mcd: Optional[float]
    mcd_dtw: float
    mcd_dtw_sl: float
    path_len: int
    len_ratio: float

    def as_dict(self):
        return asdict(self)

    def finite(self):
        values = [self.mcd_dtw, self.mcd_dtw_sl, self.len_ratio]
        if self.mcd is not None:
            values.append(self.mcd)
        return all(math.isfinite(v) for v in values)


def score_pair(generated, reference):
    """All MCD variants for two dB mels; ``mcd`` is None when lengths differ."""
    a, b = to_cepstra(generated), to_cepstra(reference)
    warped, path = mcd_dtw(a, b)
    ratio = length_ratio(len(a), len(b))
    return MetricReport(
        mcd=mcd(a, b) if len(a) == len(b) else None,
        mcd_dtw=warped,
        mcd_dtw_sl=warped * ratio,
        path_len=len(path),
        len_ratio=ratio,
    )


# -- emotion / identity classifiers --------------------------------------------

CLASSIFIER_MAGIC = b"HPMCLSF\0"
CLASSIFIER_VERSION = 1


class MelClassifier(nn.Module):
    """Two temporal convolutions, masked mean pooling, linear read-out."""

    def __init__(self, n_mels, n_classes, channels=32, kernel=3):
        super().__init__()
        self.conv1 = nn.Conv1d(n_mels, channels, kernel, padding=kernel // 2)
        self.conv2 = nn.Conv1d(channels, channels, kernel, padding=kernel // 2)
        self.out = nn.Linear(channels, n_classes)

    def forward(self, mel, mask):
        # mel: (B, T, n_mels) normalized; mask: (B, T)
        keep = mask[:, None, :].to(mel.dtype)
        h = F.relu(self.conv1(mel.transpose(1, 2) * keep)) * keep
        h = F.relu(self.conv2(h)) * keep
        pooled = h.sum(-1) / keep.sum(-1).clamp(min=1.0)
        return self.out(pooled)


def _pad_mels(mels, mean, std):
    longest = max(len(m) for m in mels)
    x = np.zeros((len(mels), longest, len(mean)), dtype=np.float32)
    mask = np.zeros((len(mels), longest), dtype=bool)
    for i, m in enumerate(mels):
        x[i, : len(m)] = (np.asarray(m) - mean) / std
        mask[i, : len(m)] = True
    return torch.from_numpy(x), torch.from_numpy(mask)


class MelClassifiers:
    """Emotion and speaker classifiers sharing one normalization."""

    def __init__(self, n_mels, n_emotions, n_speakers, mean=None, std=None):
        self.n_mels, self.n_emotions, self.n_speakers = n_mels, n_emotions, n_speakers
        self.mean = np.zeros(n_mels) if mean is None else np.asarray(mean, dtype=np.float64)
        self.std = np.ones(n_mels) if std is None else np.asarray(std, dtype=np.float64)
        self.emotion = MelClassifier(n_mels, n_emotions)
        self.speaker = MelClassifier(n_mels, n_speakers)

    def fit(self, mels, emotions, speakers, steps=300, lr=3e-3, seed=0):
        if not mels:
            raise EmptyInput("no mels to fit classifiers on")
        stacked = np.concatenate([np.asarray(m, dtype=np.float64) for m in mels])
        self.mean, self.std = stacked.mean(0), np.maximum(stacked.std(0), 1e-3)
        x, mask = _pad_mels(mels, self.mean, self.std)
        for net, labels, n in ((self.emotion, emotions, self.n_emotions),
                               (self.speaker, speakers, self.n_speakers)):
            y = _labels(labels, n)
            with torch.random.fork_rng(devices=[]):
                torch.manual_seed(seed)
                net.__init__(self.n_mels, n)
            opt = torch.optim.Adam(net.parameters(), lr=lr)
            net.train()
            for _ in range(steps):
                opt.zero_grad()
                F.cross_entropy(net(x, mask), y).backward()
                opt.step()
            net.eval()
        return self

    @torch.no_grad()
    def predict(self, mels):
        x, mask = _pad_mels(mels, self.mean, self.std)
        return (self.emotion(x, mask).argmax(-1).numpy(), self.speaker(x, mask).argmax(-1).numpy())

    def save(self, path):
        arrays = {f"emotion.{k}": v.numpy() for k, v in self.emotion.state_dict().items()}
        arrays.update({f"speaker.{k}": v.numpy() for k, v in self.speaker.state_dict().items()})
        arrays["mean"], arrays["std"] = self.mean, self.std
        header = {"n_mels": self.n_mels, "n_emotions": self.n_emotions, "n_speakers": self.n_speakers}
        formats.write_tensor_file(path, CLASSIFIER_MAGIC, CLASSIFIER_VERSION, header, arrays)

    @classmethod
    def load(cls, path):
        if not Path(path).exists():
            raise MissingModel(f"no classifier checkpoint at {path}")
        header, arrays = formats.read_tensor_file(path, CLASSIFIER_MAGIC, CLASSIFIER_VERSION)
        out = cls(header["n_mels"], header["n_emotions"], header["n_speakers"],
                  arrays.pop("mean"), arrays.pop("std"))
        for prefix, net in (("emotion.", out.emotion), ("speaker.", out.speaker)):
            net.load_state_dict({k[len(prefix):]: torch.from_numpy(v)
                                 for k, v in arrays.items() if k.startswith(prefix)})
            net.eval()
        return out


def _labels(labels, n_classes):
    y = torch.as_tensor(np.asarray(labels, dtype=np.int64))
    if y.numel() and (int(y.min()) < 0 or int(y.max()) >= n_classes):
        raise InvalidLabel(f"labels must lie in [0, {n_classes})")
    return y


def accuracy_eval(mels, emotions, speakers, classifier):
    """Top-1 (emotion accuracy, identity accuracy) of ``classifier`` on ``mels``.

    ``classifier`` is a :class:`MelClassifiers` or a path to a saved one.
    """
    if not mels:
        raise EmptyInput("no generated mels to score")
    if not isinstance(classifier, MelClassifiers):
        classifier = MelClassifiers.load(classifier)
    emo_pred, spk_pred = classifier.predict(mels)
    emo = _labels(emotions, classifier.n_emotions).numpy()
    spk = _labels(speakers, classifier.n_speakers).numpy()
    return float(np.mean(emo_pred == emo)), float(np.mean(spk_pred == spk))
