"""Shared network blocks: positional encoding, attention, FFT blocks, predictors."""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeError

# Additive stand-in for -inf on masked logits; exp underflows to exactly 0.
MASK_VALUE = -1e9


def sinusoid_table(length, width, dtype=torch.float32, device=None):
    pos = torch.arange(length, dtype=torch.float64, device=device)[:, None]
    dim = torch.arange(width, dtype=torch.float64, device=device)[None, :]
    angle = pos / torch.pow(10000.0, 2.0 * torch.div(dim, 2, rounding_mode="floor") / width)
    table = torch.empty(length, width, dtype=torch.float64, device=device)
    table[:, 0::2] = torch.sin(angle[:, 0::2])
    table[:, 1::2] = torch.cos(angle[:, 1::2])
    return table.to(dtype)


def sequence_mask(lengths, max_len=None):
    """Boolean (B, T) mask, True on valid positions."""
    lengths = torch.as_tensor(lengths)
    max_len = int(max_len if max_len is not None else lengths.max())
    return torch.arange(max_len, device=lengths.device)[None, :] < lengths[:, None]


def zero_masked(x, mask):
    if mask is None:
        return x
    return x * mask.unsqueeze(-1).to(x.dtype)


def masked_softmax(logits, key_mask):
    """Softmax over the last axis; ``key_mask`` (B, K) marks attendable keys."""
    if key_mask is not None:
        while key_mask.dim() < logits.dim():
            key_mask = key_mask.unsqueeze(-2)
        logits = logits + (~key_mask).to(logits.dtype) * MASK_VALUE
    return torch.softmax(logits, dim=-1)


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention over ``n_heads`` heads with a linear output mix.

    ``forward`` returns the mixed output (B, Tq, d_model) and the weights
    (B, n_heads, Tq, Tk).  Rows of masked queries are zeroed in the output.
    """

    def __init__(self, d_model, n_heads, d_query=None, d_key=None):
        super().__init__()
        if d_model % n_heads:
            raise ShapeError(f"{n_heads} heads do not divide width {d_model}")
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.w_q = nn.Linear(d_query or d_model, d_model)
        self.w_k = nn.Linear(d_key or d_model, d_model)
        self.w_v = nn.Linear(d_key or d_model, d_model)
        self.w_o = nn.Linear(d_model, d_model)

    def forward(self, query, key, key_mask=None, query_mask=None):
        if query.shape[-1] != self.w_q.in_features or key.shape[-1] != self.w_k.in_features:
            raise ShapeError(
                f"attention widths: query {query.shape[-1]} vs {self.w_q.in_features}, "
                f"key {key.shape[-1]} vs {self.w_k.in_features}")
        b, tq, _ = query.shape
        tk = key.shape[1]
        q = self.w_q(query).view(b, tq, self.n_heads, self.d_head).transpose(1, 2)
        k = self.w_k(key).view(b, tk, self.n_heads, self.d_head).transpose(1, 2)
        v = self.w_v(key).view(b, tk, self.n_heads, self.d_head).transpose(1, 2)
        logits = q @ k.transpose(-1, -2) / math.sqrt(self.d_head)
        weights = masked_softmax(logits, key_mask)
        heads = (weights @ v).transpose(1, 2).reshape(b, tq, self.d_model)
        return zero_masked(self.w_o(heads), query_mask), weights


class ConvFeedForward(nn.Module):
    def __init__(self, d_model, hidden, kernel_size, dropout):
        super().__init__()
        self.conv1 = nn.Conv1d(d_model, hidden, kernel_size, padding=(kernel_size - 1) // 2)
        self.conv2 = nn.Conv1d(hidden, d_model, 1)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask=None):
        h = F.relu(self.conv1(zero_masked(x, mask).transpose(1, 2)))
        h = self.conv2(h).transpose(1, 2)
        return self.dropout(h)


class FFTBlock(nn.Module):
    """Self-attention and conv feed-forward sublayers, each residual + LayerNorm."""

    def __init__(self, d_model, n_heads, ffn_hidden, kernel_size, dropout=0.1):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ffn = ConvFeedForward(d_model, ffn_hidden, kernel_size, dropout)
        self.norm2 = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask=None):
        h, weights = self.attn(x, x, key_mask=mask, query_mask=mask)
        x = zero_masked(self.norm1(x + self.dropout(h)), mask)
        x = zero_masked(self.norm2(x + self.ffn(x, mask)), mask)
        return x, weights


class FFTStack(nn.Module):
    """Sinusoidal positions added once at entry, then ``n_blocks`` FFT blocks."""

    def __init__(self, n_blocks, d_model, n_heads, ffn_hidden, kernel_size, dropout=0.1):
        super().__init__()
        self.d_model = d_model
        self.blocks = nn.ModuleList(
            FFTBlock(d_model, n_heads, ffn_hidden, kernel_size, dropout) for _ in range(n_blocks))

    def forward(self, x, mask=None, return_weights=False):
        if x.shape[-1] != self.d_model:
            raise ShapeError(f"FFT stack expects width {self.d_model}, got {x.shape[-1]}")
        x = x + sinusoid_table(x.shape[1], self.d_model, x.dtype, x.device)[None]
        x = zero_masked(x, mask)
        weights = []
        for block in self.blocks:
            x, w = block(x, mask)
            weights.append(w)
        return (x, weights) if return_weights else x


class VariancePredictor(nn.Module):
    """[Conv1d -> ReLU -> LayerNorm -> Dropout] x 2, then a per-frame scalar."""

    def __init__(self, d_in, hidden, kernel_size=3, dropout=0.1):
        super().__init__()
        pad = (kernel_size - 1) // 2
        self.conv1 = nn.Conv1d(d_in, hidden, kernel_size, padding=pad)
        self.norm1 = nn.LayerNorm(hidden)
        self.conv2 = nn.Conv1d(hidden, hidden, kernel_size, padding=pad)
        self.norm2 = nn.LayerNorm(hidden)
        self.dropout = nn.Dropout(dropout)
        self.linear = nn.Linear(hidden, 1)

    def forward(self, x, mask=None):
        h = zero_masked(x, mask)
        h = self.dropout(self.norm1(F.relu(self.conv1(h.transpose(1, 2))).transpose(1, 2)))
        h = zero_masked(h, mask)
        h = self.dropout(self.norm2(F.relu(self.conv2(h.transpose(1, 2))).transpose(1, 2)))
        out = self.linear(h).squeeze(-1)
        return out * mask.to(out.dtype) if mask is not None else out
