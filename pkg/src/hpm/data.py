"""Loading feature directories, normalization statistics and batch collation."""

from pathlib import Path

import numpy as np
import torch

from . import formats
from .errors import InvalidConfig, MissingFeature, ValidationError
from .frontend import symbols_to_sequence


class Dataset:
    """Samples of one split, read eagerly from a manifest-indexed directory."""

    def __init__(self, root, split="train", require_targets=True):
        self.root = Path(root)
        self.meta, entries = formats.read_manifest(self.root)
        self.split = split
        self.entries = [e for e in entries if split is None or e["split"] == split]
        self.samples = [formats.read_sample(self.root / e["path"], require_targets)
                        for e in self.entries]

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def ids(self):
        return [s["id"] for s in self.samples]


def compute_stats(samples):
    """Per-channel mel mean/std and scalar pitch/energy mean/std."""
    if not samples:
        raise ValidationError("cannot compute statistics of an empty sample set")
    mel = np.concatenate([s["mel"] for s in samples]).astype(np.float64)
    voiced = [s["pitch"][s["voiced"]] for s in samples if s["voiced"].any()]
    pitch = np.concatenate(voiced) if voiced else np.zeros(1)
    energy = np.concatenate([s["energy"] for s in samples]).astype(np.float64)
    return {
        "mel_mean": mel.mean(0).tolist(),
        "mel_std": np.maximum(mel.std(0), 1e-3).tolist(),
        "pitch_mean": float(pitch.mean()),
        "pitch_std": float(max(pitch.std(), 1e-3)),
        "energy_mean": float(energy.mean()),
        "energy_std": float(max(energy.std(), 1e-6)),
    }


def normalize_mel(mel, stats):
    return (np.asarray(mel, dtype=np.float64) - np.asarray(stats["mel_mean"])) / np.asarray(stats["mel_std"])


def denormalize_mel(mel, stats):
    return np.asarray(mel, dtype=np.float64) * np.asarray(stats["mel_std"]) + np.asarray(stats["mel_mean"])


def normalize_pitch(pitch, stats):
    return (np.asarray(pitch) - stats["pitch_mean"]) / stats["pitch_std"]


def normalize_energy(energy, stats):
    return (np.asarray(energy) - stats["energy_mean"]) / stats["energy_std"]


def _pad(arrays, dtype):
    longest = max(a.shape[0] for a in arrays)
    out = np.zeros((len(arrays), longest) + arrays[0].shape[1:], dtype=dtype)
    for i, a in enumerate(arrays):
        out[i, : a.shape[0]] = a
    return out


def _mask(lengths):
    lengths = np.asarray(lengths)
    return np.arange(lengths.max())[None, :] < lengths[:, None]


def collate(samples, stats=None, scene_rows=8, dtype=torch.float32, with_targets=True):
    """Pad a list of sample dicts into a batch of tensors.

    A single scene vector per clip is tiled to ``scene_rows`` rows; per-frame
    scene files are kept as they are.
    """
    if not samples:
        raise ValidationError("empty batch")
    np_dtype = np.float64 if dtype == torch.float64 else np.float32
    tokens = [symbols_to_sequence(s["symbols"]).tokens for s in samples]
    lips = []
    for s in samples:
        patch = np.asarray(s["lips"])
        lips.append(patch[..., None] if patch.ndim == 3 else patch)
    scenes = []
    for s in samples:
        scene = np.asarray(s["scene"], dtype=np.float64)
        if scene.ndim == 1:
            scene = scene[None]
        if scene.shape[0] == 0:
            raise MissingFeature(f"sample {s.get('id')} has no scene rows")
        scenes.append(np.repeat(scene, scene_rows, axis=0) if scene.shape[0] == 1 else scene)
    for s, l in zip(samples, lips):
        if not (len(s["valence"]) == len(s["arousal"]) == l.shape[0]):
            raise ValidationError(f"sample {s.get('id')}: affect and lip frame counts differ")
    batch = {
        "tokens": torch.from_numpy(_pad(tokens, np.int64)),
        "token_mask": torch.from_numpy(_mask([len(t) for t in tokens])),
        "lips": torch.from_numpy(_pad(lips, np_dtype)),
        "video_mask": torch.from_numpy(_mask([l.shape[0] for l in lips])),
        "valence": torch.from_numpy(_pad([np.asarray(s["valence"]) for s in samples], np_dtype)),
        "arousal": torch.from_numpy(_pad([np.asarray(s["arousal"]) for s in samples], np_dtype)),
        "scene": torch.from_numpy(_pad(scenes, np_dtype)),
        "scene_mask": torch.from_numpy(_mask([s.shape[0] for s in scenes])),
        "speaker": torch.tensor([int(s["speaker"]) for s in samples]),
        "emotion": torch.tensor([int(s["emotion"]) for s in samples]),
    }
    if all("speaker_vector" in s for s in samples):
        batch["speaker_vector"] = torch.from_numpy(np.stack([s["speaker_vector"] for s in samples]).astype(np_dtype))
    if with_targets and all("mel" in s for s in samples):
        if stats is None:
            raise InvalidConfig("normalization stats are required to collate targets")
        mels = [normalize_mel(s["mel"], stats) for s in samples]
        batch["mel"] = torch.from_numpy(_pad(mels, np_dtype))
        batch["mel_len"] = torch.tensor([m.shape[0] for m in mels])
        batch["mel_mask"] = torch.from_numpy(_mask([m.shape[0] for m in mels]))
        batch["pitch"] = torch.from_numpy(_pad([normalize_pitch(s["pitch"], stats) for s in samples], np_dtype))
        batch["energy"] = torch.from_numpy(_pad([normalize_energy(s["energy"], stats) for s in samples], np_dtype))
    return batch
