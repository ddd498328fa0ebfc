import math

import pytest
import torch

from hpm.data import Dataset
from hpm.errors import InvalidConfig, MissingModel, TrainingDiverged, ValidationError
from hpm.train import Trainer, evaluate_losses, load_checkpoint, read_checkpoint_header, save_checkpoint, train

from conftest import micro_config, random_batch


def _cfg(**kw):
    return micro_config(**{"model.n_mels": 80, "model.n_speakers": 4, "train.batch_size": 4, **kw})


def test_empty_dataset_rejected():
    with pytest.raises(ValidationError):
        train([], _cfg(), steps=1)


def test_loss_decreases(small_dataset):
    samples = Dataset(small_dataset, None).samples
    trainer = train(samples, _cfg(**{"train.lr": 3e-3}), steps=30)
    assert trainer.step == 30
    fresh = Trainer(_cfg(**{"train.lr": 3e-3}), samples).model
    before = evaluate_losses(fresh, samples, trainer.stats, trainer.config)
    after = evaluate_losses(trainer.model, samples, trainer.stats, trainer.config)
    assert after["mel"] < before["mel"]
    assert 0.0 <= after["emotion_accuracy"] <= 1.0


def test_step_losses_deterministic(small_dataset):
    samples = Dataset(small_dataset, None).samples
    runs = [[r.total for r in Trainer(_cfg(), samples).fit(10)] for _ in range(2)]
    assert all(abs(a - b) <= 1e-10 for a, b in zip(*runs))


def test_divergence_raises(small_dataset):
    samples = Dataset(small_dataset, None).samples
    trainer = Trainer(_cfg(), samples)
    with torch.no_grad():
        for p in trainer.model.generator.parameters():
            p.fill_(math.nan)
    with pytest.raises(TrainingDiverged):
        trainer.train_step()


def test_checkpoint_round_trip(tmp_path, small_dataset):
    samples = Dataset(small_dataset, None).samples
    trainer = train(samples, _cfg(), steps=2)
    save_checkpoint(tmp_path / "m.ckpt", trainer.model, trainer.stats, trainer.step)
    model, stats, header = load_checkpoint(tmp_path / "m.ckpt")
    assert header["step"] == 2 and stats == trainer.stats and model.config == trainer.config
    batch = random_batch(model.config, [3, 4])
    trainer.model.eval()
    with torch.no_grad():
        a, b = trainer.model(batch)["mel_after"], model(batch)["mel_after"]
    assert torch.allclose(a, b, rtol=0, atol=1e-12)


def test_checkpoint_errors(tmp_path):
    with pytest.raises(MissingModel):
        load_checkpoint(tmp_path / "none.ckpt")
    (tmp_path / "junk.ckpt").write_bytes(b"not a checkpoint at all")
    with pytest.raises(InvalidConfig):
        read_checkpoint_header(tmp_path / "junk.ckpt")
