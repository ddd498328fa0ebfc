from fractions import Fraction

import numpy as np
import torch
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hpm import metrics
from hpm.aligner import ConvTransposeExpander, frame_ratio
from hpm.config import ABLATION_PRESETS, Config, loads
from hpm.layers import masked_softmax
from hpm.synth import SPLIT_RATIOS, assign_splits

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def cepstra(min_len=1, max_len=6):
    return st.integers(min_len, max_len).flatmap(lambda n: arrays(np.float64, (n, 4), elements=finite))


@given(st.integers(8000, 48000), st.integers(64, 1024), st.integers(10, 60), st.integers(1, 200))
def test_mel_length_is_rounded_product(sr, hop, fps, t_v):
    r = frame_ratio(sr, hop, fps)
    exact = Fraction(sr, hop * fps) * t_v
    n = r.mel_length(t_v)
    assert n >= 1
    assert n == 1 or abs(n - exact) <= Fraction(1, 2)
    assert r.video_index(n - 1) <= t_v


@given(cepstra(), cepstra())
@settings(max_examples=60, deadline=None)
def test_dtw_symmetric_and_nonnegative(a, b):
    ab, path = metrics.mcd_dtw(a, b)
    ba, _ = metrics.mcd_dtw(b, a)
    assert ab >= 0 and abs(ab - ba) <= 1e-9 * max(1.0, ab)
    steps = np.diff(path, axis=0)
    assert np.all(steps >= 0) and np.all(steps.sum(1) >= 1) and np.all(steps <= 1)


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(arrays(np.float64, (n, 4), elements=finite),
                                                     arrays(np.float64, (n, 4), elements=finite))))
@settings(max_examples=60, deadline=None)
def test_dtw_never_exceeds_diagonal(pair):
    a, b = pair
    assert metrics.mcd_dtw(a, b)[0] <= metrics.mcd(a, b) + 1e-9
    assert metrics.mcd_dtw_sl(a, b) == metrics.mcd_dtw(a, b)[0]


@given(st.lists(st.integers(0, 7), min_size=1, max_size=200))
def test_splits_within_one_sample(labels):
    splits = assign_splits(labels)
    for name, ratio in SPLIT_RATIOS:
        assert abs(splits.count(name) - ratio * len(labels)) <= 1


@given(st.sampled_from(sorted(ABLATION_PRESETS)), st.integers(1, 8).map(lambda k: 8 * k),
       st.floats(1e-6, 1e-2))
def test_config_text_round_trip(preset, d_model, lr):
    cfg = Config({"model.d_model": d_model, "train.lr": lr, "aligner.heads": 8,
                  "model.fft_heads": 2}).with_preset(preset if preset != "single-head" else "no-pa")
    assert loads(cfg.dumps()) == cfg


@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 7), st.data())
@settings(max_examples=50, deadline=None)
def test_masked_softmax_rows(b, q, k, data):
    g = torch.Generator().manual_seed(data.draw(st.integers(0, 2 ** 16)))
    keep = torch.rand(b, k, generator=g) > 0.4
    keep[:, 0] = True
    w = masked_softmax(torch.randn(b, q, k, generator=g, dtype=torch.float64) * 10, keep)
    assert torch.all(w >= 0)
    assert torch.allclose(w.sum(-1), torch.ones(b, q, dtype=torch.float64), atol=1e-12)
    assert torch.all(w.masked_select(~keep[:, None, :].expand_as(w)) == 0)


@given(st.sampled_from([(16000, 400), (24000, 400), (16000, 200), (22050, 256)]), st.integers(1, 30))
@settings(max_examples=40, deadline=None)
def test_expander_length_contract(rate, t_v):
    torch.manual_seed(0)
    ex = ConvTransposeExpander(4, frame_ratio(rate[0], rate[1], 20)).double()
    out, n = ex(torch.randn(1, t_v, 4, dtype=torch.float64), torch.tensor([t_v]))
    assert out.shape[1] == int(n[0]) == ex.ratio.mel_length(t_v)
