"""Lip/phoneme alignment and expansion from video-frame rate to mel-frame rate."""

from dataclasses import dataclass
from fractions import Fraction
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import InvalidConfig, ShapeError
from .layers import MultiHeadAttention


def _exact(x):
    return Fraction(x) if isinstance(x, int) else Fraction(str(float(x)))


def round_half_up(x):
    return int(math.floor(Fraction(x) + Fraction(1, 2)))


@dataclass(frozen=True)
class FrameRatio:
    """Mel frames per video frame: ``r = (sr / hs) / fps`` and ``n = round(r)``."""

    r_exact: Fraction
    n: int
    sr: float
    hs: float
    fps: float

    @property
    def r(self):
        return float(self.r_exact)

    def mel_length(self, n_video_frames):
        return max(1, round_half_up(self.r_exact * n_video_frames))

    def video_index(self, mel_index):
        """Nearest video frame for a mel frame index (floor of i / r)."""
        return math.floor(Fraction(mel_index) / self.r_exact)

    def as_dict(self):
        return {"r": self.r, "r_exact": f"{self.r_exact.numerator}/{self.r_exact.denominator}",
                "n": self.n, "sr": self.sr, "hs": self.hs, "fps": self.fps}


def frame_ratio(sr, hs, fps):
    if sr is None or hs is None or fps is None or min(sr, hs, fps) <= 0:
        raise InvalidConfig(f"sr, hs and fps must be positive (got {sr}, {hs}, {fps})")
    r = _exact(sr) / (_exact(hs) * _exact(fps))
    return FrameRatio(r_exact=r, n=max(1, round_half_up(r)), sr=sr, hs=hs, fps=fps)


class LipPhonemeAligner(nn.Module):
    """Lip frames attend over phonemes (lips are the queries)."""

    def __init__(self, d_model, n_heads=8):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)

    def forward(self, lips, phonemes, lip_mask=None, phoneme_mask=None):
        if lips.shape[-1] != phonemes.shape[-1]:
            raise ShapeError(f"lip width {lips.shape[-1]} != phoneme width {phonemes.shape[-1]}")
        return self.attn(lips, phonemes, key_mask=phoneme_mask, query_mask=lip_mask)


def expand_duplicate(fused, n):
    """Repeat every row ``n`` times (no parameters)."""
    if n < 1:
        raise InvalidConfig("duplication factor must be >= 1")
    return torch.repeat_interleave(fused, int(n), dim=-2)


def fit_length(x, length):
    """Trim or zero-pad the time axis (-2) at the tail."""
    if length <= 0:
        raise InvalidConfig(f"target length must be positive, got {length}")
    t = x.shape[-2]
    if t >= length:
        return x[..., :length, :]
    pad = x.new_zeros(*x.shape[:-2], length - t, x.shape[-1])
    return torch.cat([x, pad], dim=-2)


def _stage(d_model, stride, kernel):
    return nn.ConvTranspose1d(d_model, d_model, kernel, stride=stride, padding=max(0, (kernel - stride) // 2))


class ConvTransposeExpander(nn.Module):
    """Learned upsampling by transposed convolution.

    The first stage uses the configured stride/kernel.  If its stretch is
    below ``r`` a second stage with stride ``ceil(r / stride)`` is stacked.
    The stretched sequence is linearly resampled to ``round(r * T_v)`` frames
    so that the whole clip stays aligned, then tail-trimmed or zero-padded to
    the teacher length when one is given.
    """

    def __init__(self, d_model, ratio, stride=3, kernel=10):
        super().__init__()
        self.ratio = ratio
        self.stage1 = _stage(d_model, stride, kernel)
        self.strides = [stride]
        self.stage2 = None
        if stride < ratio.r_exact:
            s2 = math.ceil(ratio.r_exact / stride)
            self.stage2 = _stage(d_model, s2, 2 * s2)
            self.strides.append(s2)

    @property
    def stretch(self):
        return math.prod(self.strides)

    def _stretch(self, fused, lengths):
        # Batched: zero rows past a clip's end only add bias beyond its own span.
        t = fused.shape[1]
        keep = torch.arange(t, device=fused.device)[None, :] < lengths[:, None]
        h = self.stage1((fused * keep[..., None].to(fused.dtype)).transpose(1, 2))[..., : self.strides[0] * t]
        if self.stage2 is not None:
            span = self.strides[0] * lengths
            keep = torch.arange(h.shape[-1], device=h.device)[None, :] < span[:, None]
            h = self.stage2(h * keep[:, None, :].to(h.dtype))[..., : self.stretch * t]
        return h

    def forward(self, fused, lengths, target_lengths=None):
        if fused.shape[1] == 0:
            raise ShapeError("cannot expand an empty sequence")
        lengths = torch.as_tensor(lengths, device=fused.device)
        h = self._stretch(fused, lengths)
        clips = []
        for b, n in enumerate(lengths.tolist()):
            y = h[b:b + 1, :, : self.stretch * n]
            base = self.ratio.mel_length(n)
            if y.shape[-1] != base:
                y = F.interpolate(y, size=base, mode="linear", align_corners=False)
            clips.append(y[0].T)
        return _stack_clips(clips, target_lengths)


class DuplicateExpander(nn.Module):
    def __init__(self, ratio):
        super().__init__()
        self.ratio = ratio

    def _run(self, x):
        return fit_length(expand_duplicate(x, self.ratio.n), self.ratio.mel_length(x.shape[0]))

    def forward(self, fused, lengths, target_lengths=None):
        return _expand_batch(self._run, self.ratio, fused, lengths, target_lengths)


def _expand_batch(run, ratio, fused, lengths, target_lengths):
    if fused.shape[1] == 0:
        raise ShapeError("cannot expand an empty sequence")
    clips = [run(fused[b, : int(n)]) for b, n in enumerate(lengths)]
    return _stack_clips(clips, target_lengths)


def _stack_clips(clips, target_lengths):
    if target_lengths is not None:
        clips = [fit_length(y, int(target_lengths[b])) for b, y in enumerate(clips)]
    mel_lengths = torch.tensor([y.shape[0] for y in clips], device=clips[0].device)
    out = clips[0].new_zeros(len(clips), int(mel_lengths.max()), clips[0].shape[-1])
    for b, y in enumerate(clips):
        out[b, : y.shape[0]] = y
    return out, mel_lengths


def resample_nearest(x, lengths, new_lengths):
    """Per-clip nearest-index resampling of (B, T, d) to new per-clip lengths."""
    out = x.new_zeros(x.shape[0], int(max(new_lengths)), x.shape[-1])
    for b, (n, m) in enumerate(zip(lengths, new_lengths)):
        n, m = int(n), int(m)
        idx = torch.div(torch.arange(m, device=x.device) * n, m, rounding_mode="floor")
        out[b, :m] = x[b, idx]
    return out


def upsample_to_mel(x, video_lengths, mel_lengths, ratio):
    """Nearest-video-frame lookup for every mel frame using floor(i / r)."""
    out = x.new_zeros(x.shape[0], int(max(mel_lengths)), x.shape[-1])
    for b, (tv, ty) in enumerate(zip(video_lengths, mel_lengths)):
        tv, ty = int(tv), int(ty)
        # floor(i / r) in exact integer arithmetic, r = num / den
        i = torch.arange(ty, device=x.device)
        idx = torch.div(i * ratio.r_exact.denominator, ratio.r_exact.numerator,
                        rounding_mode="floor").clamp(max=tv - 1)
        out[b, :ty] = x[b, idx]
    return out

