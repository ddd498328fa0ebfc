"""Mel decoder, mel-linear projection and residual postnet."""

import torch
import torch.nn as nn

from .errors import ShapeError
from .layers import FFTStack, zero_masked


class Postnet(nn.Module):
    """Five 1-D convolutions, tanh on all but the last; output is a residual."""

    def __init__(self, n_mels=80, channels=256, kernel_size=5, n_layers=5):
        super().__init__()
        pad = (kernel_size - 1) // 2
        dims = [n_mels] + [channels] * (n_layers - 1) + [n_mels]
        self.convs = nn.ModuleList(
            nn.Conv1d(dims[i], dims[i + 1], kernel_size, padding=pad) for i in range(n_layers))

    def forward(self, mel, mask=None):
        x = zero_masked(mel, mask).transpose(1, 2)
        m = None if mask is None else mask[:, None, :].to(x.dtype)
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = torch.tanh(x)
            if m is not None:
                x = x * m
        return x.transpose(1, 2)

    def zero_init(self):
        nn.init.zeros_(self.convs[-1].weight)
        nn.init.zeros_(self.convs[-1].bias)


class MelGenerator(nn.Module):
    def __init__(self, d_model, n_blocks, n_heads, ffn_hidden, kernel_size, dropout,
                 n_mels=80, postnet_channels=256, postnet_kernel=5, postnet_layers=5):
        super().__init__()
        self.d_model = d_model
        self.fuse = nn.Linear(4 * d_model, d_model)
        self.decoder = FFTStack(n_blocks, d_model, n_heads, ffn_hidden, kernel_size, dropout)
        self.mel_linear = nn.Linear(d_model, n_mels)
        self.postnet = Postnet(n_mels, postnet_channels, postnet_kernel, postnet_layers)

    def decode(self, phoneme_lip, prosody, emotion, mask=None):
        if not (phoneme_lip.shape[:2] == prosody.shape[:2] == emotion.shape[:2]):
            raise ShapeError(
                f"decoder inputs disagree on frames: {tuple(phoneme_lip.shape)}, "
                f"{tuple(prosody.shape)}, {tuple(emotion.shape)}")
        x = self.fuse(torch.cat([phoneme_lip, prosody, emotion], dim=-1))
        return self.decoder(zero_masked(x, mask), mask)

    def to_mel(self, hidden, mask=None):
        before = zero_masked(self.mel_linear(hidden), mask)
        return before, before + self.postnet(before, mask)

    def forward(self, phoneme_lip, prosody, emotion, mask=None):
        return self.to_mel(self.decode(phoneme_lip, prosody, emotion, mask), mask)
