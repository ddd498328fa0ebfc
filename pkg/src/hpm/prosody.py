"""Affect-driven prosody: arousal -> energy, valence (+ speaker) -> pitch."""

import torch
import torch.nn as nn

from .errors import ShapeError
from .layers import VariancePredictor, masked_softmax, zero_masked


class AdditiveContext(nn.Module):
    """Additive (tanh) attention from affect queries onto phoneme-lip memory.

    score[i, k] = w . tanh(W q_i + U m_k + b); weights are a softmax over k
    and the context for query i is the weighted sum of memory rows.
    """

    def __init__(self, d_query, d_memory, attn_dim):
        super().__init__()
        self.W = nn.Linear(d_query, attn_dim, bias=False)
        self.U = nn.Linear(d_memory, attn_dim, bias=False)
        self.b = nn.Parameter(torch.zeros(attn_dim))
        self.w = nn.Linear(attn_dim, 1, bias=False)

    def scores(self, query, memory):
        hidden = torch.tanh(self.W(query)[:, :, None, :] + self.U(memory)[:, None, :, :] + self.b)
        return self.w(hidden).squeeze(-1)

    def forward(self, query, memory, memory_mask=None, query_mask=None):
        if query.shape[:2] != memory.shape[:2]:
            raise ShapeError(f"query frames {tuple(query.shape[:2])} != memory frames {tuple(memory.shape[:2])}")
        weights = masked_softmax(self.scores(query, memory), memory_mask)
        return zero_masked(weights @ memory, query_mask), weights


def assemble_prosody(arousal_ctx, valence_ctx):
    """Row-wise concatenation [arousal context ; valence context]."""
    if arousal_ctx.shape[:-1] != valence_ctx.shape[:-1]:
        raise ShapeError(f"cannot concatenate {tuple(arousal_ctx.shape)} with {tuple(valence_ctx.shape)}")
    return torch.cat([arousal_ctx, valence_ctx], dim=-1)


class ProsodyAdaptor(nn.Module):
    def __init__(self, d_model, attn_dim, kernel_size=3, dropout=0.1,
                 enabled=True, use_valence=True, use_arousal=True):
        super().__init__()
        self.enabled = enabled
        self.use_valence = enabled and use_valence
        self.use_arousal = enabled and use_arousal
        self.arousal_attn = AdditiveContext(d_model, d_model, attn_dim) if self.use_arousal else None
        self.valence_attn = AdditiveContext(d_model, d_model, attn_dim) if self.use_valence else None
        self.energy_predictor = VariancePredictor(d_model, d_model, kernel_size, dropout)
        self.speaker_proj = nn.Linear(2 * d_model, d_model) if enabled else None
        self.pitch_predictor = VariancePredictor(d_model, d_model, kernel_size, dropout)

    def arousal_context(self, arousal, memory, mask):
        if self.arousal_attn is None:
            return memory, None
        return self.arousal_attn(arousal, memory, mask, mask)

    def valence_context(self, valence, memory, mask):
        if self.valence_attn is None:
            return memory, None
        return self.valence_attn(valence, memory, mask, mask)

    def predict_energy(self, ctx, mask=None):
        return self.energy_predictor(ctx, mask)

    def predict_pitch(self, ctx, speaker, mask=None):
        if self.speaker_proj is not None:
            spk = speaker[:, None, :].expand(-1, ctx.shape[1], -1)
            ctx = self.speaker_proj(torch.cat([ctx, spk], dim=-1))
        return self.pitch_predictor(ctx, mask)

    def forward(self, memory, mask, arousal, valence, speaker):
        """``arousal``/``valence`` must already be on the mel-frame clock."""
        a_ctx, a_w = self.arousal_context(arousal, memory, mask)
        v_ctx, v_w = self.valence_context(valence, memory, mask)
        return {
            "energy": self.predict_energy(a_ctx, mask),
            "pitch": self.predict_pitch(v_ctx, speaker, mask),
            "prosody": assemble_prosody(a_ctx, v_ctx),
            "arousal_weights": a_w,
            "valence_weights": v_w,
        }
