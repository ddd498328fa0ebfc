import numpy as np
import pytest
import torch

from hpm.config import Config
from hpm.frontend import INVENTORY
from hpm.synth import SyntheticSpec, generate_dataset


def micro_config(**overrides):
    """Tiny float64 model at r = 4 (16 kHz, hop 200, 20 fps)."""
    values = {"train.dtype": "float64", "audio.sr": 16000, "audio.hop": 200, "audio.fps": 20.0}
    values.update({k.replace("__", "."): v for k, v in overrides.items()})
    return Config().with_size("micro").updated(values)


def random_batch(cfg, video_lengths, token_lengths=None, seed=0, lip_size=8, targets=True,
                 dtype=torch.float64):
    """Collated batch of random inputs shaped for ``cfg``."""
    from hpm.aligner import frame_ratio

    g = torch.Generator().manual_seed(seed)
    b = len(video_lengths)
    token_lengths = token_lengths or [3 + (i % 4) for i in range(b)]
    tv, tl = max(video_lengths), max(token_lengths)
    vmask = torch.arange(tv)[None] < torch.tensor(video_lengths)[:, None]
    tmask = torch.arange(tl)[None] < torch.tensor(token_lengths)[:, None]
    tokens = torch.randint(3, len(INVENTORY), (b, tl), generator=g) * tmask
    rows = cfg["model.scene_rows"]
    batch = {
        "tokens": tokens,
        "token_mask": tmask,
        "lips": torch.rand(b, tv, lip_size, lip_size, 1, generator=g, dtype=dtype) * vmask[..., None, None, None],
        "video_mask": vmask,
        "valence": (torch.rand(b, tv, generator=g, dtype=dtype) * 2 - 1) * vmask,
        "arousal": (torch.rand(b, tv, generator=g, dtype=dtype) * 2 - 1) * vmask,
        "scene": torch.randn(b, rows, cfg["model.scene_dim"], generator=g, dtype=dtype),
        "scene_mask": torch.ones(b, rows, dtype=torch.bool),
        "speaker": torch.randint(0, cfg["model.n_speakers"], (b,), generator=g),
        "emotion": torch.randint(0, cfg["model.n_emotions"], (b,), generator=g),
    }
    if targets:
        ratio = frame_ratio(cfg["audio.sr"], cfg["audio.hop"], cfg["audio.fps"])
        mel_len = torch.tensor([ratio.mel_length(n) for n in video_lengths])
        ty = int(mel_len.max())
        mmask = torch.arange(ty)[None] < mel_len[:, None]
        batch.update({
            "mel": torch.randn(b, ty, cfg["model.n_mels"], generator=g, dtype=dtype) * mmask[..., None],
            "mel_len": mel_len,
            "mel_mask": mmask,
            "pitch": torch.randn(b, ty, generator=g, dtype=dtype) * mmask,
            "energy": torch.randn(b, ty, generator=g, dtype=dtype) * mmask,
        })
    return batch


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Eight short clips at 16 kHz / hop 200 / 20 fps, seed 5."""
    root = tmp_path_factory.mktemp("small_ds")
    spec = SyntheticSpec(n_samples=8, seed=5, min_frames=6, max_frames=8, lip_size=16, scene_dim=12)
    generate_dataset(spec, root)
    return root
