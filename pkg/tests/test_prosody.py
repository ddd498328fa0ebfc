import pytest
import torch

from hpm.errors import ShapeError
from hpm.prosody import AdditiveContext, ProsodyAdaptor, assemble_prosody

from oracles import additive_context, as_list


def _ctx(d=4, attn=3, seed=0):
    torch.manual_seed(seed)
    return AdditiveContext(d, d, attn).double()


def test_singleton_memory_gets_weight_one():
    ctx, w = _ctx()(torch.randn(1, 1, 4, dtype=torch.float64), torch.randn(1, 1, 4, dtype=torch.float64))
    assert w.item() == 1.0


def test_zero_parameters_give_column_mean():
    m = _ctx()
    for p in m.parameters():
        torch.nn.init.zeros_(p)
    memory = torch.randn(1, 5, 4, dtype=torch.float64)
    ctx, w = m(torch.randn(1, 5, 4, dtype=torch.float64), memory)
    assert torch.allclose(w, torch.full_like(w, 0.2), atol=1e-15)
    assert torch.allclose(ctx, memory.mean(1, keepdim=True).expand_as(ctx), atol=1e-14)


def test_hand_set_two_by_two():
    m = AdditiveContext(2, 2, 2).double()
    with torch.no_grad():
        m.W.weight.copy_(torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64))
        m.U.weight.copy_(torch.tensor([[0.5, -0.5], [1.0, 1.0]], dtype=torch.float64))
        m.b.copy_(torch.tensor([0.1, -0.2], dtype=torch.float64))
        m.w.weight.copy_(torch.tensor([[2.0, -1.0]], dtype=torch.float64))
    q = torch.tensor([[[0.3, -0.7], [1.0, 0.2]]], dtype=torch.float64)
    mem = torch.tensor([[[0.5, 0.5], [-1.0, 2.0]]], dtype=torch.float64)
    ctx, w = m(q, mem)
    ref_ctx, ref_w = additive_context(as_list(q[0]), as_list(mem[0]), [[1, 0], [0, 1]],
                                      [[0.5, -0.5], [1, 1]], [0.1, -0.2], [2.0, -1.0])
    assert torch.allclose(ctx[0], torch.tensor(ref_ctx, dtype=torch.float64), rtol=1e-12, atol=0)
    assert torch.allclose(w[0], torch.tensor(ref_w, dtype=torch.float64), rtol=1e-12, atol=0)


def test_query_memory_length_mismatch():
    with pytest.raises(ShapeError):
        _ctx()(torch.randn(1, 3, 4), torch.randn(1, 4, 4))


def _adaptor(**kw):
    torch.manual_seed(0)
    return ProsodyAdaptor(8, 6, 3, 0.0, **kw).double().eval()


def _inputs(t=40, b=1):
    g = torch.Generator().manual_seed(1)
    mk = lambda *s: torch.randn(*s, generator=g, dtype=torch.float64)
    return mk(b, t, 8), torch.ones(b, t, dtype=torch.bool), mk(b, t, 8), mk(b, t, 8), mk(b, 8)


def test_predictor_shapes_and_width():
    out = _adaptor()(*_inputs())
    assert out["energy"].shape == out["pitch"].shape == (1, 40)
    assert out["prosody"].shape == (1, 40, 16)


def test_zero_input_zero_final_layer_gives_zero():
    ad = _adaptor()
    torch.nn.init.zeros_(ad.energy_predictor.linear.weight)
    torch.nn.init.zeros_(ad.energy_predictor.linear.bias)
    torch.nn.init.zeros_(ad.pitch_predictor.linear.weight)
    torch.nn.init.zeros_(ad.pitch_predictor.linear.bias)
    zeros = torch.zeros(1, 6, 8, dtype=torch.float64)
    assert torch.count_nonzero(ad.predict_energy(zeros)) == 0
    assert torch.count_nonzero(ad.predict_pitch(zeros, torch.zeros(1, 8, dtype=torch.float64))) == 0


def test_speaker_changes_pitch():
    ad = _adaptor()
    ctx = torch.randn(1, 10, 8, dtype=torch.float64)
    a = ad.predict_pitch(ctx, torch.nn.functional.normalize(torch.randn(1, 8, dtype=torch.float64), dim=-1))
    b = ad.predict_pitch(ctx, torch.nn.functional.normalize(torch.randn(1, 8, dtype=torch.float64), dim=-1))
    assert not torch.allclose(a, b)


def test_repeated_call_identical():
    ad = _adaptor()
    x = _inputs()
    assert torch.equal(ad(*x)["energy"], ad(*x)["energy"])


def test_assemble_concatenates_in_order():
    a = torch.zeros(1, 1, 256)
    a[0, 0, 0] = 1
    v = torch.zeros(1, 1, 256)
    v[0, 0, 1] = 1
    out = assemble_prosody(a, v)
    assert out.shape == (1, 1, 512)
    assert out[0, 0, 0] == 1 and out[0, 0, 257] == 1
    with pytest.raises(ShapeError):
        assemble_prosody(torch.zeros(1, 40, 4), torch.zeros(1, 39, 4))
    x, y = torch.randn(1, 3, 4), torch.randn(1, 3, 4)
    assert not torch.equal(assemble_prosody(x, y), assemble_prosody(y, x))


@pytest.mark.parametrize("flag", ["use_valence", "use_arousal"])
def test_disabled_branch_passes_memory(flag):
    ad = _adaptor(**{flag: False})
    memory, mask, arousal, valence, spk = _inputs(t=5)
    out = ad(memory, mask, arousal, valence, spk)
    half = out["prosody"][..., :8] if flag == "use_arousal" else out["prosody"][..., 8:]
    assert torch.equal(half, memory)
    assert out["prosody"].shape[-1] == 16


def test_disabled_adaptor_feeds_memory_to_both():
    ad = _adaptor(enabled=False)
    memory, mask, arousal, valence, spk = _inputs(t=5)
    out = ad(memory, mask, arousal, valence, spk)
    assert out["arousal_weights"] is None and out["valence_weights"] is None
    assert torch.equal(out["prosody"], torch.cat([memory, memory], -1))
