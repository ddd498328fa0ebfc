"""Synthetic audiovisual dubbing corpus with known generating factors.

Every clip is rendered from a handful of latent contours:

* valence v(t) and arousal a(t): an emotion anchor plus two slow sinusoids;
* F0(t) = speaker_base * 2 ** (0.25 * v(t));
* amplitude(t) = 0.05 * exp(1.2 * a(t));
* harmonic weights shaped by a phoneme formant and an emotion formant,
  normalized to unit L2 so that frame energy follows amplitude;
* mouth crops: an ellipse whose opening is (a(t) + 1) / 2 and whose width
  depends on the current phoneme;
* scene vector: an emotion prototype plus Gaussian noise.

Targets (mel, pitch, energy) are then measured from the rendered waveform
with :func:`hpm.audio.extract_targets`.
"""

from dataclasses import asdict, dataclass
import hashlib
import json
from pathlib import Path

import numpy as np
from scipy.special import expit

from . import formats
from .aligner import frame_ratio
from .audio import extract_targets
from .errors import InvalidConfig
from .frontend import SYMBOL_TO_ID, text_to_symbols

GENERATOR_VERSION = 1

# (valence, arousal) per emotion class, on the circumplex.
EMOTION_ANCHORS = (
    (-0.6, 0.8),   # angry
    (-0.8, 0.2),   # disgust
    (-0.3, 0.9),   # fear
    (0.8, 0.6),    # happy
    (0.0, 0.0),    # neutral
    (-0.7, -0.5),  # sad
    (0.4, 0.95),   # surprise
    (0.3, -0.4),   # others
)

SPEAKER_BASE_HZ = tuple(90.0 * 1.25 ** s for s in range(8))

_SYLLABLES = ("ba", "ko", "mi", "shu", "tee", "la", "no", "ri", "cha", "vo", "zee", "pa",
              "dun", "gai", "hoy", "fo", "wi", "jo", "ther", "sing", "quo", "yay", "mu", "ek")

SPLIT_RATIOS = (("train", 0.6), ("val", 0.1), ("test", 0.3))


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 32
    n_speakers: int = 4
    n_emotions: int = 8
    fps: float = 20.0
    sr: int = 16000
    hs: int = 200
    min_frames: int = 8
    max_frames: int = 16
    seed: int = 1
    lip_size: int = 32
    scene_dim: int = 1024
    scene_noise: float = 0.5
    win: int = 1024
    n_mels: int = 80

    def validate(self):
        for name in ("n_samples", "n_speakers", "n_emotions", "fps", "sr", "hs",
                     "min_frames", "max_frames", "lip_size", "scene_dim", "win", "n_mels"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.seed < 0:
            raise InvalidConfig("seed must be non-negative")
        if self.n_speakers > len(SPEAKER_BASE_HZ):
            raise InvalidConfig(f"at most {len(SPEAKER_BASE_HZ)} speakers")
        if self.n_emotions != len(EMOTION_ANCHORS):
            raise InvalidConfig(f"the emotion label space has {len(EMOTION_ANCHORS)} classes")
        if self.min_frames > self.max_frames:
            raise InvalidConfig("min_frames exceeds max_frames")
        ratio = frame_ratio(self.sr, self.hs, self.fps)
        if (ratio.mel_length(self.min_frames) - 1) * self.hs + self.hs // 2 < self.win:
            raise InvalidConfig("shortest clip would be shorter than one analysis window")
        return self

    def digest(self):
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(f"{GENERATOR_VERSION}:{text}".encode()).hexdigest()[:16]


def assign_splits(labels):
    """Stratified 60/10/30 split with exact totals.

    Samples are visited grouped by label; each goes to the split that is
    furthest behind its running quota, which spreads every class across
    splits and keeps the totals within one sample of the ratios.
    """
    n = len(labels)
    order = sorted(range(n), key=lambda i: (labels[i], i))
    counts = {name: 0 for name, _ in SPLIT_RATIOS}
    out = [None] * n
    for step, i in enumerate(order, 1):
        name = max(SPLIT_RATIOS, key=lambda kv: kv[1] * step - counts[kv[0]])[0]
        counts[name] += 1
        out[i] = name
    return out


def _contour(rng, anchor, t, depth):
    f1, f2 = rng.uniform(1.5, 3.0), rng.uniform(3.0, 5.0)
    p1, p2 = rng.uniform(0, 2 * np.pi, size=2)
    raw = anchor + depth * np.sin(2 * np.pi * f1 * t + p1) + 0.5 * depth * np.sin(2 * np.pi * f2 * t + p2)
    return np.clip(raw, -1.0, 1.0)


def _render_lips(rng, openness, widths, size):
    grid = np.arange(size) - (size - 1) / 2.0
    x, y = np.meshgrid(grid, grid, indexing="ij")  # axis 0 = width, axis 1 = height
    frames = []
    for o, w in zip(openness, widths):
        ry = 1.0 + 9.0 * o
        dist = (x / w) ** 2 + (y / ry) ** 2
        img = expit(8.0 * (1.0 - dist))
        frames.append(img + rng.normal(0.0, 0.02, img.shape))
    return np.stack(frames)[..., None]


def render_sample(spec, rng, speaker, emotion, prototypes):
    """Render one clip; returns the sample mapping plus the raw waveform."""
    ratio = frame_ratio(spec.sr, spec.hs, spec.fps)
    n_video = int(rng.integers(spec.min_frames, spec.max_frames + 1))
    n_mel = ratio.mel_length(n_video)
    n_audio = (n_mel - 1) * spec.hs + spec.hs // 2
    t = np.arange(n_audio) / spec.sr

    words = [
        "".join(rng.choice(_SYLLABLES, size=int(rng.integers(1, 3))))
        for _ in range(int(rng.integers(2, 5)))
    ]
    text = " ".join(words)
    symbols = text_to_symbols(text)
    ids = np.array([SYMBOL_TO_ID[s] for s in symbols])

    v_anchor, a_anchor = EMOTION_ANCHORS[emotion]
    valence = _contour(rng, v_anchor, t, 0.15)
    arousal = _contour(rng, a_anchor, t, 0.25)

    f0 = SPEAKER_BASE_HZ[speaker] * 2.0 ** (0.25 * valence)
    amp = 0.05 * np.exp(1.2 * arousal)
    duration = n_audio / spec.sr
    phone_at = np.minimum((t / duration * len(ids)).astype(int), len(ids) - 1)
    formant = 350.0 + (ids[phone_at] * 97 % 900)
    box = np.ones(spec.sr // 50) / (spec.sr // 50)
    formant = np.convolve(np.pad(formant, len(box), mode="edge"), box, mode="same")[len(box):-len(box)]
    emo_formant = 1200.0 + 350.0 * emotion

    n_harm = int(0.45 * spec.sr // f0.min())
    h = np.arange(1, n_harm + 1)[None, :]
    freq = h * f0[:, None]
    weights = h ** -0.8 * (1 + 4 * np.exp(-(((freq - formant[:, None]) / 150.0) ** 2)))
    weights = weights * (1 + 3 * np.exp(-(((freq - emo_formant) / 250.0) ** 2)))
    weights = np.where(freq < 0.45 * spec.sr, weights, 0.0)
    weights /= np.linalg.norm(weights, axis=1, keepdims=True)
    phase = 2 * np.pi * np.cumsum(f0) / spec.sr
    wave = amp * np.sum(weights * np.sin(h * phase[:, None]), axis=1)

    centers = (np.arange(n_video) + 0.5) / spec.fps
    at = np.minimum((centers * spec.sr).astype(int), n_audio - 1)
    openness = (arousal[at] + 1.0) / 2.0
    widths = 7.0 + 3.0 * (ids[phone_at[at]] % 4) / 3.0
    lips = _render_lips(rng, openness, widths, spec.lip_size)

    scene = prototypes[emotion] + spec.scene_noise * rng.normal(size=spec.scene_dim)

    contours, mel = extract_targets(wave, spec.sr, spec.hs, spec.win, spec.n_mels)
    assert mel.n_frames == n_mel
    sample = {
        "text": text,
        "symbols": symbols,
        "lips": lips.astype(np.float32),
        "valence": valence[at],
        "arousal": arousal[at],
        "scene": scene[None].astype(np.float32),
        "speaker": speaker,
        "emotion": emotion,
        "mel": mel.frames.astype(np.float32),
        "pitch": contours.pitch,
        "f0_hz": contours.f0_hz,
        "voiced": contours.voiced_mask,
        "energy": contours.energy,
    }
    return sample, wave


def draw_labels(spec):
    """Scene prototypes plus per-sample emotion, speaker and split.

    Labels are balanced permutations of the class ids, so every class appears
    ``n // n_classes`` or one more times.
    """
    master = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    prototypes = master.normal(size=(spec.n_emotions, spec.scene_dim))
    emotions = master.permutation(np.arange(spec.n_samples) % spec.n_emotions)
    speakers = master.permutation(np.arange(spec.n_samples) % spec.n_speakers)
    return prototypes, emotions, speakers, assign_splits(emotions.tolist())


def generate_dataset(spec, out_dir):
    """Write ``spec.n_samples`` feature directories plus ``manifest.txt``.

    The output is a pure function of ``spec``: every random draw comes from
    generators seeded by ``spec.seed`` (one child stream per sample).
    """
    spec.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc

    prototypes, emotions, speakers, splits = draw_labels(spec)
    children = np.random.SeedSequence([spec.seed, 1]).spawn(spec.n_samples)

    entries = []
    width = max(4, len(str(spec.n_samples - 1)))
    for i in range(spec.n_samples):
        sid = f"s{i:0{width}d}"
        rng = np.random.default_rng(children[i])
        sample, _ = render_sample(spec, rng, int(speakers[i]), int(emotions[i]), prototypes)
        formats.write_sample(out / sid, sample)
        entries.append({"id": sid, "split": splits[i], "path": sid})

    meta = {"generator": f"hpm-synth v{GENERATOR_VERSION}", "seed": spec.seed,
            "spec_hash": spec.digest(), "spec": json.dumps(asdict(spec), sort_keys=True)}
    formats.write_manifest(out / "manifest.txt", entries, meta)
    return {"root": str(out), "entries": entries, "meta": meta}


def spec_from_manifest(root):
    meta, _ = formats.read_manifest(root)
    return SyntheticSpec(**json.loads(meta["spec"]))
