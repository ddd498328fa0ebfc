"""Flat key/value configuration.

Files hold one ``key = value`` pair per line; ``#`` starts a comment.  Every
key must exist in :data:`DEFAULTS`, whose value type decides how the text is
parsed.  Command-line overrides use the same ``key=value`` syntax.
"""

import hashlib
from pathlib import Path

from .errors import InvalidConfig

DEFAULTS = {
    # widths and depths
    "model.d_model": 256,
    "model.fft_heads": 4,
    "model.ffn_hidden": 1024,
    "model.ffn_kernel": 9,
    "model.phoneme_blocks": 4,
    "model.lip_blocks": 3,
    "model.decoder_blocks": 6,
    "model.dropout": 0.1,
    "model.n_speakers": 8,
    "model.n_emotions": 8,
    "model.n_mels": 80,
    "model.scene_dim": 1024,
    "model.scene_rows": 8,
    "model.lip_channels1": 32,
    "model.lip_channels2": 64,
    "model.face_channels": 32,
    "model.predictor_kernel": 3,
    "model.postnet_channels": 256,
    "model.postnet_kernel": 5,
    "model.postnet_layers": 5,
    # duration aligner
    "aligner.enabled": True,
    "aligner.heads": 8,
    "aligner.expansion": "conv_transpose",
    "aligner.stride": 3,
    "aligner.kernel": 10,
    # prosody adaptor
    "adaptor.enabled": True,
    "adaptor.use_valence": True,
    "adaptor.use_arousal": True,
    "adaptor.affect_source": "va",
    "adaptor.attn_dim": 256,
    # atmosphere booster
    "booster.enabled": True,
    "booster.strict_paper_attention": False,
    # audio analysis
    "audio.sr": 22050,
    "audio.hop": 256,
    "audio.fps": 20.0,
    "audio.win": 1024,
    "audio.fmin": 0.0,
    "audio.fmax": 0.0,
    "audio.f0_min": 60.0,
    "audio.f0_max": 600.0,
    # optimisation
    "train.lr": 1e-4,
    "train.lr_preset": "",
    "train.batch_size": 16,
    "train.steps": 2000,
    "train.seed": 1,
    "train.grad_clip": 1.0,
    "train.beta1": 0.9,
    "train.beta2": 0.98,
    "train.eps": 1e-9,
    "train.lambda_mel": 1.0,
    "train.lambda_pitch": 1.0,
    "train.lambda_energy": 1.0,
    "train.lambda_emo": 1.0,
    "train.log_every": 50,
    "train.dtype": "float32",
}

CHOICES = {
    "aligner.expansion": ("conv_transpose", "duplicate"),
    "adaptor.affect_source": ("va", "face_features"),
    "train.dtype": ("float32", "float64"),
    "train.lr_preset": ("", "v2c", "chem", "desk"),
}

LR_PRESETS = {"v2c": 1e-5, "chem": 5e-5, "desk": 1e-4}

# Ablation switches, one per row of the ablation table.
ABLATION_PRESETS = {
    "no-da": {"aligner.enabled": False},
    "no-pa": {"adaptor.enabled": False},
    "no-ab": {"booster.enabled": False},
    "no-valence": {"adaptor.use_valence": False},
    "no-arousal": {"adaptor.use_arousal": False},
    "face-features": {"adaptor.affect_source": "face_features"},
    "single-head": {"aligner.heads": 1},
    "duplicate": {"aligner.expansion": "duplicate"},
}

# Reduced widths that train in minutes on one CPU core.
DESK_SIZE = {
    "model.d_model": 64,
    "model.ffn_hidden": 128,
    "model.ffn_kernel": 5,
    "model.phoneme_blocks": 2,
    "model.lip_blocks": 2,
    "model.decoder_blocks": 3,
    "model.lip_channels1": 8,
    "model.lip_channels2": 16,
    "model.face_channels": 8,
    "model.postnet_channels": 64,
    "model.scene_dim": 1024,
    "adaptor.attn_dim": 32,
    "model.dropout": 0.0,
}

MICRO_SIZE = {
    "model.d_model": 16,
    "model.fft_heads": 2,
    "model.ffn_hidden": 16,
    "model.ffn_kernel": 3,
    "model.phoneme_blocks": 1,
    "model.lip_blocks": 1,
    "model.decoder_blocks": 1,
    "model.n_speakers": 3,
    "model.n_mels": 8,
    "model.scene_dim": 12,
    "model.scene_rows": 3,
    "model.lip_channels1": 2,
    "model.lip_channels2": 3,
    "model.face_channels": 2,
    "model.postnet_channels": 6,
    "model.postnet_layers": 3,
    "model.dropout": 0.0,
    "aligner.heads": 4,
    "aligner.stride": 3,
    "aligner.kernel": 4,
    "adaptor.attn_dim": 8,
}

SIZES = {"paper": {}, "desk": DESK_SIZE, "micro": MICRO_SIZE}


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InvalidConfig(f"not a boolean: {text!r}")


def _coerce(key, value):
    if key not in DEFAULTS:
        raise InvalidConfig(f"unknown config key: {key}")
    kind = type(DEFAULTS[key])
    try:
        if kind is bool:
            out = value if isinstance(value, bool) else _parse_bool(str(value))
        elif kind is int:
            number = float(value) if isinstance(value, str) else value
            if isinstance(number, float) and not number.is_integer():
                raise ValueError(value)
            out = int(number)
        elif kind is float:
            out = float(value)
        else:
            out = str(value).strip()
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"bad value for {key}: {value!r}") from exc
    if key in CHOICES and out not in CHOICES[key]:
        raise InvalidConfig(f"{key} must be one of {CHOICES[key]}, got {out!r}")
    return out


class Config:
    """Validated mapping from flat keys to typed values."""

    def __init__(self, values=None, **overrides):
        self._values = dict(DEFAULTS)
        for key, value in (values or {}).items():
            self._values[key] = _coerce(key, value)
        for key, value in overrides.items():
            key = key.replace("__", ".")
            self._values[key] = _coerce(key, value)
        self._check()

    def _check(self):
        v = self._values
        for key in ("audio.sr", "audio.hop", "audio.fps", "audio.win", "model.d_model",
                    "aligner.heads", "aligner.stride", "aligner.kernel", "train.batch_size"):
            if v[key] <= 0:
                raise InvalidConfig(f"{key} must be positive")
        if v["model.d_model"] % v["aligner.heads"]:
            raise InvalidConfig("aligner.heads must divide model.d_model")
        if v["model.d_model"] % v["model.fft_heads"]:
            raise InvalidConfig("model.fft_heads must divide model.d_model")

    def __getitem__(self, key):
        return self._values[key]

    def __contains__(self, key):
        return key in self._values

    def get(self, key, default=None):
        return self._values.get(key, default)

    def as_dict(self):
        return dict(self._values)

    def updated(self, overrides):
        vals = dict(self._values)
        for key, value in overrides.items():
            vals[key] = _coerce(key, value)
        return Config(vals)

    def with_preset(self, name):
        if name not in ABLATION_PRESETS:
            raise InvalidConfig(f"unknown ablation preset {name!r}; choose from {sorted(ABLATION_PRESETS)}")
        return self.updated(ABLATION_PRESETS[name])

    def with_size(self, name):
        if name not in SIZES:
            raise InvalidConfig(f"unknown size {name!r}; choose from {sorted(SIZES)}")
        return self.updated(SIZES[name])

    @property
    def learning_rate(self):
        preset = self._values["train.lr_preset"]
        return LR_PRESETS[preset] if preset else self._values["train.lr"]

    def dumps(self):
        lines = []
        for key in sorted(self._values):
            value = self._values[key]
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def hash(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, Config) and self._values == other._values

    def __repr__(self):
        changed = {k: v for k, v in self._values.items() if DEFAULTS[k] != v}
        return f"Config({changed})"


def parse_text(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = _coerce(key, value)
    return values


def parse_overrides(items):
    values = {}
    for item in items or ():
        if "=" not in item:
            raise InvalidConfig(f"override must be key=value, got {item!r}")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key] = _coerce(key, value)
    return values


def load(path=None, overrides=(), size=None, preset=None):
    """Build a :class:`Config` from an optional file plus overrides.

    Order of application: defaults, size, file, preset, ``--set`` overrides.
    """
    cfg = Config()
    if size:
        cfg = cfg.with_size(size)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        cfg = cfg.updated(parse_text(text))
    if preset:
        cfg = cfg.with_preset(preset)
    if overrides:
        cfg = cfg.updated(parse_overrides(overrides))
    return cfg


def loads(text):
    return Config(parse_text(text))
