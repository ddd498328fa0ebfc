import pytest
import torch

from hpm.config import ABLATION_PRESETS
from hpm.losses import compute_losses
from hpm.model import build_model
from hpm.train import init_model

from conftest import micro_config, random_batch


def _model(**overrides):
    return init_model(micro_config(**overrides), seed=0)


def test_output_length_without_teacher():
    model = _model().eval()
    batch = random_batch(model.config, [2, 5, 3], targets=False)
    out = model(batch)
    assert out["mel_len"].tolist() == [model.ratio.mel_length(n) for n in (2, 5, 3)]
    assert out["mel_after"].shape == (3, max(out["mel_len"]), 8)
    assert torch.count_nonzero(out["mel_after"][0, int(out["mel_len"][0]):]) == 0


def test_teacher_lengths_are_exact():
    model = _model(**{"audio.sr": 22050, "audio.hop": 256}).eval()
    batch = random_batch(model.config, [4, 6])
    out = model(batch, target_lengths=batch["mel_len"])
    assert out["mel_len"].tolist() == batch["mel_len"].tolist()


def test_every_parameter_gets_gradient():
    model = _model().train()
    batch = random_batch(model.config, [3, 4])
    total, _ = compute_losses(model(batch, target_lengths=batch["mel_len"]), batch)
    total.backward()
    for group, params in model.parameter_groups().items():
        assert any(p.grad is not None and p.grad.abs().sum() > 0 for _, p in params), group


@pytest.mark.parametrize("preset", sorted(ABLATION_PRESETS))
def test_presets_run(preset):
    model = init_model(micro_config().with_preset(preset), seed=0).eval()
    batch = random_batch(model.config, [3, 2])
    out = model(batch, target_lengths=batch["mel_len"])
    assert torch.isfinite(out["mel_after"]).all()
    assert (out["emotion_logits"] is None) == (preset == "no-ab")


def test_padding_does_not_leak():
    model = _model().eval()
    batch = random_batch(model.config, [3, 5])
    single = {k: v[:1] for k, v in batch.items()}
    for key in ("lips", "valence", "arousal", "video_mask"):
        single[key] = single[key][:, :3]
    tl = int(batch["token_mask"][0].sum())
    single["tokens"], single["token_mask"] = batch["tokens"][:1, :tl], batch["token_mask"][:1, :tl]
    a = model(batch)["mel_after"][0, :12]
    b = model(single)["mel_after"][0]
    assert torch.allclose(a, b, atol=1e-10)


def test_build_model_dtype():
    assert next(build_model(micro_config()).parameters()).dtype == torch.float64
