"""Training objectives and their weighted sum."""

from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F

from .errors import InvalidLabel, ShapeError


@dataclass
class LossReport:
    mel: float
    pitch: float
    energy: float
    emo: float
    total: float
    step: int = 0

    def as_dict(self):
        return asdict(self)


def _check_same(pred, target):
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} vs target {tuple(target.shape)}")


def _masked_frame_mean(per_frame, mask):
    """Mean over valid frames of each sequence, then over the batch."""
    if mask is None:
        return per_frame.mean(dim=-1).mean() if per_frame.dim() > 1 else per_frame.mean()
    m = mask.to(per_frame.dtype)
    return ((per_frame * m).sum(-1) / m.sum(-1)).mean()


def loss_pitch(pred, target, mask=None):
    """Mean squared error over frames."""
    _check_same(pred, target)
    return _masked_frame_mean((pred - target) ** 2, mask)


def loss_energy(pred, target, mask=None):
    """Mean squared error over frames."""
    _check_same(pred, target)
    return _masked_frame_mean((pred - target) ** 2, mask)


def loss_mel(pred, target, mask=None):
    """Mean over frames of the per-frame L1 norm across mel bins."""
    _check_same(pred, target)
    return _masked_frame_mean((pred - target).abs().sum(-1), mask)


def _check_labels(labels, n_classes):
    labels = torch.as_tensor(labels)
    if labels.dtype.is_floating_point or (labels < 0).any() or (labels >= n_classes).any():
        raise InvalidLabel(f"emotion labels must be integers in [0, {n_classes}): {labels.tolist()}")
    return labels


def loss_emotion(probs, label):
    """Cross entropy -log p[label] of a probability vector (or batch of them)."""
    probs = torch.as_tensor(probs)
    label = _check_labels(label, probs.shape[-1])
    picked = probs.gather(-1, label.reshape(*probs.shape[:-1], 1)).squeeze(-1)
    return (-torch.log(picked)).mean()


def loss_emotion_logits(logits, label):
    """Same objective computed stably from logits."""
    label = _check_labels(label, logits.shape[-1])
    return F.cross_entropy(logits, label.to(logits.device))


def total_loss(mel, pitch, energy, emo, weights=(1.0, 1.0, 1.0, 1.0)):
    l1, l2, l3, l4 = weights
    return l1 * mel + l2 * pitch + l3 * energy + l4 * emo


def report(parts, weights=(1.0, 1.0, 1.0, 1.0), step=0):
    """Build a :class:`LossReport` from the four (scalar) parts."""
    vals = [float(p) for p in parts]
    return LossReport(*vals, total=float(total_loss(*vals, weights=weights)), step=step)


def compute_losses(outputs, batch, weights=(1.0, 1.0, 1.0, 1.0)):
    """All parts for one batch; returns ``(total_tensor, parts_dict)``.

    The mel part sums the per-frame L1 of the pre- and post-postnet outputs.
    The emotion part is zero when the model has no emotion head.
    """
    mask = batch["mel_mask"]
    target = batch["mel"]
    mel = loss_mel(outputs["mel_before"], target, mask) + loss_mel(outputs["mel_after"], target, mask)
    pitch = loss_pitch(outputs["pitch"], batch["pitch"], mask)
    energy = loss_energy(outputs["energy"], batch["energy"], mask)
    if outputs["emotion_logits"] is not None:
        emo = loss_emotion_logits(outputs["emotion_logits"], batch["emotion"])
    else:
        emo = mel.new_zeros(())
    total = total_loss(mel, pitch, energy, emo, weights)
    return total, {"mel": mel, "pitch": pitch, "energy": energy, "emo": emo}
