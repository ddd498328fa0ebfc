"""Optimization loop, checkpoints and batch inference."""

import logging
import math
from pathlib import Path

import numpy as np
import torch

from . import data as data_mod
from . import formats
from .config import Config, loads as config_loads
from .errors import InvalidConfig, MissingModel, TrainingDiverged, ValidationError
from .losses import compute_losses, loss_emotion_logits, loss_energy, loss_mel, loss_pitch, report
from .model import DubbingModel

log = logging.getLogger(__name__)

MAGIC = b"HPMCKPT\0"
CHECKPOINT_VERSION = 1


def torch_dtype(config):
    return torch.float64 if config["train.dtype"] == "float64" else torch.float32


def init_model(config, seed=None):
    """Build a model whose initial weights depend only on ``seed``."""
    seed = config["train.seed"] if seed is None else seed
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = DubbingModel(config)
    return model.to(torch_dtype(config))


class Trainer:
    def __init__(self, config, samples, stats=None, seed=None):
        if not samples:
            raise ValidationError("training set is empty")
        self.config = config
        self.samples = list(samples)
        self.stats = stats or data_mod.compute_stats(self.samples)
        self.seed = config["train.seed"] if seed is None else seed
        self.dtype = torch_dtype(config)
        self.model = init_model(config, self.seed)
        self.optimizer = torch.optim.Adam(
            self.model.parameters(), lr=config.learning_rate,
            betas=(config["train.beta1"], config["train.beta2"]), eps=config["train.eps"])
        self.weights = tuple(config[f"train.lambda_{k}"] for k in ("mel", "pitch", "energy", "emo"))
        self.rng = np.random.default_rng(self.seed)
        self.step = 0
        self._order = []

    def _next_indices(self):
        size = min(self.config["train.batch_size"], len(self.samples))
        out = []
        while len(out) < size:
            if not self._order:
                self._order = list(self.rng.permutation(len(self.samples)))
            idx = self._order.pop()
            if idx not in out:
                out.append(idx)
        return out

    def batch(self, indices):
        return data_mod.collate([self.samples[i] for i in indices], self.stats,
                                self.config["model.scene_rows"], self.dtype)

    def train_step(self):
        self.model.train()
        batch = self.batch(self._next_indices())
        outputs = self.model(batch, target_lengths=batch["mel_len"])
        total, parts = compute_losses(outputs, batch, self.weights)
        self.step += 1
        rep = report([parts[k].item() for k in ("mel", "pitch", "energy", "emo")], self.weights, self.step)
        if not math.isfinite(total.item()):
            raise TrainingDiverged(f"non-finite loss at step {self.step}", rep.as_dict())
        self.optimizer.zero_grad()
        total.backward()
        clip = self.config["train.grad_clip"]
        if clip > 0:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), clip)
        self.optimizer.step()
        return rep

    def fit(self, steps=None, callback=None):
        steps = self.config["train.steps"] if steps is None else steps
        reports = []
        for _ in range(steps):
            rep = self.train_step()
            reports.append(rep)
            if callback is not None:
                callback(rep)
        return reports


def train(samples, config, steps=None, callback=None, seed=None):
    """Train on ``samples``; returns the :class:`Trainer` (model, stats, step)."""
    if not samples:
        raise ValidationError("cannot train on an empty dataset")
    trainer = Trainer(config, samples, seed=seed)
    trainer.fit(steps, callback)
    return trainer


# -- inference ----------------------------------------------------------------

@torch.no_grad()
def run_batches(model, samples, stats, config, batch_size=16, teacher=False):
    model.eval()
    dtype = next(model.parameters()).dtype
    out = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = data_mod.collate(chunk, stats, config["model.scene_rows"], dtype,
                                 with_targets=teacher)
        target = batch["mel_len"] if teacher else None
        outputs = model(batch, target_lengths=target)
        out.append((chunk, batch, outputs))
    return out


def synthesize(model, samples, stats, config, batch_size=16):
    """Generated mels (dB), prosody and emotion predictions per sample."""
    results = []
    for chunk, _, outputs in run_batches(model, samples, stats, config, batch_size):
        for b, s in enumerate(chunk):
            n = int(outputs["mel_len"][b])
            mel = data_mod.denormalize_mel(outputs["mel_after"][b, :n].cpu().numpy(), stats)
            logits = outputs["emotion_logits"]
            results.append({
                "id": s.get("id"),
                "mel": mel,
                "pitch": outputs["pitch"][b, :n].cpu().numpy() * stats["pitch_std"] + stats["pitch_mean"],
                "energy": outputs["energy"][b, :n].cpu().numpy() * stats["energy_std"] + stats["energy_mean"],
                "emotion_logits": None if logits is None else logits[b].cpu().numpy(),
            })
    return results


def evaluate_losses(model, samples, stats, config, batch_size=16):
    """Mean per-sample losses with teacher lengths, plus G_emo accuracy."""
    sums = {"mel": 0.0, "pitch": 0.0, "energy": 0.0, "emo": 0.0}
    correct, count = 0, 0
    for chunk, batch, out in run_batches(model, samples, stats, config, batch_size, teacher=True):
        n = len(chunk)
        mask = batch["mel_mask"]
        sums["mel"] += n * (loss_mel(out["mel_before"], batch["mel"], mask)
                            + loss_mel(out["mel_after"], batch["mel"], mask)).item()
        sums["pitch"] += n * loss_pitch(out["pitch"], batch["pitch"], mask).item()
        sums["energy"] += n * loss_energy(out["energy"], batch["energy"], mask).item()
        if out["emotion_logits"] is not None:
            sums["emo"] += n * loss_emotion_logits(out["emotion_logits"], batch["emotion"]).item()
            correct += int((out["emotion_logits"].argmax(-1) == batch["emotion"]).sum())
        count += n
    result = {k: v / count for k, v in sums.items()}
    result["emotion_accuracy"] = correct / count if model.has_emotion_head else None
    return result


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(path, model, stats, step=0, extra=None):
    """Single file: magic, uint32 version, uint64 header length, JSON header, raw tensors."""
    arrays = {name: t.detach().cpu().numpy() for name, t in model.state_dict().items()}
    header = {
        "config": model.config.dumps(),
        "config_hash": model.config.hash(),
        "ratio": model.ratio.as_dict(),
        "stats": stats,
        "step": step,
        "extra": extra or {},
    }
    formats.write_tensor_file(path, MAGIC, CHECKPOINT_VERSION, header, arrays)


def read_checkpoint_header(path):
    if not Path(path).exists():
        raise MissingModel(f"no checkpoint at {path}")
    try:
        return formats.read_tensor_header(path, MAGIC, CHECKPOINT_VERSION)
    except ValidationError as exc:
        raise InvalidConfig(str(exc)) from exc


def load_checkpoint(path):
    """Return ``(model, stats, header)`` restored from :func:`save_checkpoint`."""
    read_checkpoint_header(path)
    header, arrays = formats.read_tensor_file(path, MAGIC, CHECKPOINT_VERSION)
    config = config_loads(header["config"])
    if config.hash() != header["config_hash"]:
        raise InvalidConfig("checkpoint config hash mismatch")
    model = DubbingModel(config)
    state = {name: torch.from_numpy(arr) for name, arr in arrays.items()}
    dtype = next(iter(state.values())).dtype if state else torch.float32
    model = model.to(dtype)
    model.load_state_dict(state)
    model.eval()
    return model, header["stats"], header


def config_of(header):
    return config_loads(header["config"])


__all__ = [
    "Trainer", "train", "init_model", "synthesize", "evaluate_losses", "run_batches",
    "save_checkpoint", "load_checkpoint", "read_checkpoint_header", "Config",
]
