"""Signal processing: STFT, mel analysis, prosody targets, Griffin-Lim."""

from dataclasses import dataclass, field
import wave

import numpy as np

from . import kernels
from .errors import InvalidAudio, InvalidConfig

DB_FLOOR = -80.0
_AMP_FLOOR = 10.0 ** (DB_FLOOR / 20.0)


@dataclass
class MelSpectrogram:
    frames: np.ndarray  # (T_y, n_mels) log-mel in dB, floored at DB_FLOOR
    sr: int
    hop: int
    win: int = 1024
    fmin: float = 0.0
    fmax: float = 0.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise InvalidConfig(f"mel frames must be (T>=1, n_mels), got {self.frames.shape}")
        if self.sr <= 0 or self.hop <= 0 or self.win <= 0:
            raise InvalidConfig("mel metadata needs positive sr, hop and win")
        if not self.fmax:
            self.fmax = self.sr / 2.0
        if not 0 <= self.fmin < self.fmax <= self.sr / 2.0:
            raise InvalidConfig(f"bad mel band edges fmin={self.fmin} fmax={self.fmax}")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_mels(self):
        return self.frames.shape[1]

    def meta(self):
        return {"sr": self.sr, "hop": self.hop, "win": self.win, "fmin": self.fmin,
                "fmax": self.fmax, "n_mels": self.n_mels, "n_frames": self.n_frames}


@dataclass
class ProsodyContours:
    pitch: np.ndarray  # log-F0, interpolated through unvoiced frames
    energy: np.ndarray  # L2 norm of each magnitude frame
    voiced_mask: np.ndarray
    f0_hz: np.ndarray = None
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.pitch)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sr, n_fft, n_mels=80, fmin=0.0, fmax=None):
    """Triangular filters on the HTK mel scale, shape (n_mels, n_fft // 2 + 1)."""
    fmax = fmax or sr / 2.0
    freqs = np.linspace(0.0, sr / 2.0, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def _frame(signal, win, hop):
    pad = win // 2
    if len(signal) <= pad:
        raise InvalidAudio(f"audio of {len(signal)} samples is shorter than half a window ({pad})")
    padded = np.pad(signal, pad, mode="reflect")
    n_frames = 1 + len(signal) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    return padded[idx]


def stft(signal, win=1024, hop=256):
    """Centered (reflect-padded) Hann STFT, frames along axis 0."""
    frames = _frame(np.asarray(signal, dtype=np.float64), win, hop)
    return np.fft.rfft(frames * np.hanning(win + 1)[:-1], axis=1)


def istft(spec, win=1024, hop=256, length=None):
    window = np.hanning(win + 1)[:-1]
    frames = np.fft.irfft(spec, n=win, axis=1) * window
    n_frames = spec.shape[0]
    total = win + hop * (n_frames - 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    for t in range(n_frames):
        out[t * hop:t * hop + win] += frames[t]
        norm[t * hop:t * hop + win] += window ** 2
    out /= np.where(norm > 1e-8, norm, 1.0)
    out = out[win // 2:]
    if length is not None:
        out = out[:length] if len(out) >= length else np.pad(out, (0, length - len(out)))
    return out


def amplitude_to_db(mag):
    return 20.0 * np.log10(np.maximum(mag, _AMP_FLOOR))


def db_to_amplitude(db):
    amp = 10.0 ** (np.asarray(db, dtype=np.float64) / 20.0)
    return np.where(np.asarray(db) <= DB_FLOOR, 0.0, amp)


def log_mel(signal, sr, hop, win=1024, n_mels=80, fmin=0.0, fmax=None):
    mag = np.abs(stft(signal, win, hop))
    fb = mel_filterbank(sr, win, n_mels, fmin, fmax)
    return MelSpectrogram(amplitude_to_db(mag @ fb.T), sr=sr, hop=hop, win=win,
                          fmin=fmin, fmax=fmax or sr / 2.0)


def frame_energy(signal, hop, win=1024):
    return np.sqrt(np.sum(np.abs(stft(signal, win, hop)) ** 2, axis=1))


def track_f0(signal, sr, hop, win=1024, f0_min=60.0, f0_max=600.0, threshold=0.3):
    """Frame-wise autocorrelation pitch tracker.

    Returns ``(f0_hz, voiced)``; unvoiced frames carry 0 Hz.  The lag with the
    largest biased autocorrelation inside ``[sr/f0_max, sr/f0_min]`` is refined
    by parabolic interpolation.  A frame is voiced when that peak exceeds
    ``threshold`` times the zero-lag energy.
    """
    frames = _frame(np.asarray(signal, dtype=np.float64), win, hop)
    frames = frames - frames.mean(axis=1, keepdims=True)
    min_lag = max(2, int(np.floor(sr / f0_max)))
    max_lag = min(win - 2, int(np.ceil(sr / f0_min)))
    energy, acf = kernels.frame_autocorr(np.ascontiguousarray(frames), min_lag, max_lag)
    best = np.argmax(acf, axis=1)
    peak = acf[np.arange(len(best)), best]
    voiced = (energy > 1e-10) & (peak > threshold * np.maximum(energy, 1e-300))
    lag = (best + min_lag).astype(np.float64)
    inner = (best > 0) & (best < acf.shape[1] - 1)
    rows = np.nonzero(inner)[0]
    a = acf[rows, best[rows] - 1]
    b = acf[rows, best[rows]]
    c = acf[rows, best[rows] + 1]
    denom = a - 2.0 * b + c
    shift = np.where(np.abs(denom) > 1e-300, 0.5 * (a - c) / np.where(denom == 0, 1.0, denom), 0.0)
    lag[rows] += np.clip(shift, -0.5, 0.5)
    f0 = np.where(voiced, sr / lag, 0.0)
    return f0, voiced


def interpolate_log_f0(f0, voiced):
    """Log-F0 with unvoiced gaps filled linearly (edges held); zeros if never voiced."""
    out = np.zeros(len(f0))
    idx = np.nonzero(voiced)[0]
    if len(idx) == 0:
        return out
    out[:] = np.interp(np.arange(len(f0)), idx, np.log(f0[idx]))
    return out


def extract_targets(audio, sr, hop, win=1024, n_mels=80, fmin=0.0, fmax=None,
                    f0_min=60.0, f0_max=600.0):
    """Pitch, energy and log-mel targets on a shared frame grid."""
    audio = np.asarray(audio, dtype=np.float64)
    if audio.ndim != 1 or len(audio) < win:
        raise InvalidAudio(f"need at least one window ({win} samples), got {audio.shape}")
    if not np.all(np.isfinite(audio)):
        raise InvalidAudio("audio contains non-finite samples")
    mel = log_mel(audio, sr, hop, win, n_mels, fmin, fmax)
    energy = frame_energy(audio, hop, win)
    f0, voiced = track_f0(audio, sr, hop, win, f0_min, f0_max)
    contours = ProsodyContours(pitch=interpolate_log_f0(f0, voiced), energy=energy,
                               voiced_mask=voiced, f0_hz=f0)
    assert len(contours) == mel.n_frames
    return contours, mel


def griffin_lim(mel, iters=60, seed=0):
    """Invert a dB log-mel spectrogram to a waveform.

    The mel magnitudes are mapped back to linear-frequency magnitudes with the
    non-negative-clipped pseudo-inverse of the filterbank; phase is recovered
    by alternating projections.
    """
    if iters < 1:
        raise InvalidConfig("griffin_lim needs iters >= 1")
    if not isinstance(mel, MelSpectrogram):
        raise InvalidConfig("griffin_lim expects a MelSpectrogram with metadata")
    fb = mel_filterbank(mel.sr, mel.win, mel.n_mels, mel.fmin, mel.fmax)
    mel_amp = db_to_amplitude(mel.frames)
    mag = np.maximum(mel_amp @ np.linalg.pinv(fb).T, 0.0)
    length = (mel.n_frames - 1) * mel.hop
    rng = np.random.default_rng(seed)
    phase = np.exp(2j * np.pi * rng.random(mag.shape))
    signal = istft(mag * phase, mel.win, mel.hop, length)
    for _ in range(iters):
        rebuilt = _stft_fixed(signal, mel.win, mel.hop, mel.n_frames)
        phase = np.exp(1j * np.angle(rebuilt))
        signal = istft(mag * phase, mel.win, mel.hop, length)
    return signal


def _stft_fixed(signal, win, hop, n_frames):
    spec = stft(signal, win, hop) if len(signal) > win // 2 else np.zeros((0, win // 2 + 1))
    if spec.shape[0] >= n_frames:
        return spec[:n_frames]
    return np.pad(spec, ((0, n_frames - spec.shape[0]), (0, 0)))


def write_wav(path, samples, sr):
    """16-bit PCM mono; samples are peak-limited to [-1, 1]."""
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(sr))
        fh.writeframes((pcm * 32767.0).astype("<i2").tobytes())


def read_wav(path):
    with wave.open(str(path), "rb") as fh:
        sr = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0, sr
