from fractions import Fraction

import pytest
import torch

from hpm.aligner import (ConvTransposeExpander, DuplicateExpander, LipPhonemeAligner, expand_duplicate,
                         fit_length, frame_ratio, resample_nearest, round_half_up, upsample_to_mel)
from hpm.errors import InvalidConfig, ShapeError


def test_frame_ratio_exact_division():
    r = frame_ratio(16000, 200, 20)
    assert r.r == 4.0 and r.n == 4 and r.r_exact == 4


def test_frame_ratio_non_integer():
    r = frame_ratio(22050, 256, 20)
    assert r.r_exact == Fraction(22050, 5120)
    assert r.r == pytest.approx(4.306640625) and r.n == 4
    assert r.as_dict()["r_exact"] == "2205/512"


@pytest.mark.parametrize("args", [(16000, 200, 0), (0, 200, 20), (16000, -1, 20)])
def test_frame_ratio_rejects_non_positive(args):
    with pytest.raises(InvalidConfig):
        frame_ratio(*args)


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.49)] == [1, 2, 3, 2]


def _aligner(d=16, heads=8):
    torch.manual_seed(0)
    return LipPhonemeAligner(d, heads).double()


def test_single_phoneme_gets_all_weight():
    _, w = _aligner()(torch.randn(1, 5, 16, dtype=torch.float64), torch.randn(1, 1, 16, dtype=torch.float64))
    assert torch.equal(w, torch.ones_like(w))


def test_identical_keys_split_evenly():
    ph = torch.randn(1, 1, 16, dtype=torch.float64).repeat(1, 2, 1)
    _, w = _aligner()(torch.randn(1, 4, 16, dtype=torch.float64), ph)
    assert torch.allclose(w, torch.full_like(w, 0.5), atol=1e-15)


def test_masked_phoneme_gets_zero_weight():
    mask = torch.tensor([[True, False]])
    _, w = _aligner()(torch.randn(1, 3, 16, dtype=torch.float64), torch.randn(1, 2, 16, dtype=torch.float64),
                      phoneme_mask=mask)
    assert torch.count_nonzero(w[..., 1]) == 0


def test_single_phoneme_output_is_mixed_value_vector():
    al = _aligner(heads=1)
    ph = torch.randn(1, 1, 16, dtype=torch.float64)
    out, _ = al(torch.randn(1, 3, 16, dtype=torch.float64), ph)
    a = al.attn
    expected = a.w_o(a.w_v(ph))
    assert torch.allclose(out, expected.expand_as(out), atol=1e-12)


def test_width_mismatch_raises():
    with pytest.raises(ShapeError):
        _aligner()(torch.randn(1, 3, 16), torch.randn(1, 2, 8))


def _expander(sr=16000, hs=200, fps=20, d=8):
    torch.manual_seed(0)
    return ConvTransposeExpander(d, frame_ratio(sr, hs, fps)).double()


def test_expand_length_without_target():
    out, n = _expander()(torch.randn(1, 10, 8, dtype=torch.float64), torch.tensor([10]))
    assert out.shape[1] == 40 and n.tolist() == [40]


def test_expand_length_with_target():
    out, n = _expander()(torch.randn(1, 10, 8, dtype=torch.float64), torch.tensor([10]), torch.tensor([43]))
    assert out.shape[1] == 43 and n.tolist() == [43]
    assert torch.count_nonzero(out[0, 40:]) == 0


def test_expand_deterministic():
    ex = _expander()
    x = torch.randn(2, 7, 8, dtype=torch.float64)
    a, _ = ex(x, torch.tensor([7, 5]))
    b, _ = ex(x, torch.tensor([7, 5]))
    assert torch.equal(a, b)


def test_expand_batch_matches_single_clip():
    ex = _expander(22050, 256, 20)
    short = torch.randn(1, 5, 8, dtype=torch.float64)
    padded = torch.cat([short, torch.zeros(1, 4, 8, dtype=torch.float64)], dim=1)
    other = torch.randn(1, 9, 8, dtype=torch.float64)
    alone, n_alone = ex(short, torch.tensor([5]))
    batch, n_batch = ex(torch.cat([padded, other]), torch.tensor([5, 9]))
    assert n_batch[0] == n_alone[0]
    assert torch.allclose(batch[0, : int(n_alone[0])], alone[0], atol=1e-12)


def test_expand_stages_cover_ratio():
    for sr, hs, fps in [(16000, 400, 20), (24000, 400, 20), (16000, 200, 20), (22050, 256, 20)]:
        ex = _expander(sr, hs, fps)
        assert ex.stretch >= ex.ratio.r_exact


def test_fit_length_rejects_non_positive():
    with pytest.raises(InvalidConfig):
        fit_length(torch.zeros(3, 2), 0)


def test_duplicate_rows():
    x = torch.tensor([[1.0], [2.0], [3.0]])
    assert expand_duplicate(x, 2)[:, 0].tolist() == [1, 1, 2, 2, 3, 3]
    assert torch.equal(expand_duplicate(x, 1), x)


@pytest.mark.parametrize("t_v", range(1, 9))
@pytest.mark.parametrize("n", range(1, 6))
def test_duplicate_row_count(t_v, n):
    assert expand_duplicate(torch.zeros(t_v, 2), n).shape[0] == n * t_v


def test_duplicate_expander_contract():
    ex = DuplicateExpander(frame_ratio(22050, 256, 20))
    x = torch.randn(1, 10, 4)
    out, n = ex(x, torch.tensor([10]))
    assert n.tolist() == [43]
    assert torch.equal(out[0, :40], expand_duplicate(x[0], 4))
    assert torch.equal(out[0, 40:], torch.zeros(3, 4))


def test_resample_nearest_identity_and_stretch():
    x = torch.arange(4.0)[None, :, None]
    assert torch.equal(resample_nearest(x, [4], [4]), x)
    assert resample_nearest(x, [4], [8])[0, :, 0].tolist() == [0, 0, 1, 1, 2, 2, 3, 3]


def test_upsample_to_mel_uses_floor():
    r = frame_ratio(22050, 256, 20)
    x = torch.arange(3.0)[None, :, None]
    out = upsample_to_mel(x, [3], [r.mel_length(3)], r)
    expected = [min(int(i / r.r), 2) for i in range(r.mel_length(3))]
    assert out[0, :, 0].long().tolist() == expected
