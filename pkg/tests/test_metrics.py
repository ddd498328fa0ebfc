import math

import numpy as np
import pytest
import torch

from hpm import metrics
from hpm.errors import EmptyInput, InvalidLabel, MissingModel, ShapeError, ValidationError

from oracles import MCD_K, dct_ortho, delannoy, dtw_brute_force, mcd as mcd_oracle, monotone_paths


def test_scale_constant():
    assert metrics.MCD_SCALE == pytest.approx(6.141851463713754, rel=1e-12)
    assert metrics.MCD_SCALE == MCD_K


def test_cepstra_match_direct_dct():
    mel = np.random.default_rng(0).uniform(-80, 0, (3, 20))
    c = metrics.to_cepstra(mel)
    for t in range(3):
        ref = dct_ortho([v * math.log(10) / 20 for v in mel[t]])
        assert np.allclose(c[t], ref[1:14], rtol=1e-10, atol=1e-12)


def test_constant_frames_have_zero_cepstra():
    assert np.allclose(metrics.to_cepstra(np.full((2, 80), -30.0)), 0.0, atol=1e-12)


def test_cepstra_input_validation():
    with pytest.raises(ShapeError):
        metrics.to_cepstra(np.zeros(80))
    with pytest.raises(ShapeError):
        metrics.to_cepstra(np.zeros((2, 13)))
    with pytest.raises(ValidationError):
        metrics.to_cepstra(np.full((2, 80), np.inf))


def test_mcd_examples():
    a = np.zeros((4, 13))
    assert metrics.mcd(a, a) == 0.0
    b = a.copy()
    b[:, 0] = 1.0
    assert metrics.mcd(a, b) == pytest.approx(MCD_K, rel=1e-12)
    with pytest.raises(ShapeError):
        metrics.mcd(a, a[:3])
    with pytest.raises(EmptyInput):
        metrics.mcd(a[:0], a[:0])


def test_mcd_matches_oracle(rng):
    a, b = rng.standard_normal((6, 13)), rng.standard_normal((6, 13))
    assert metrics.mcd(a, b) == pytest.approx(mcd_oracle(a.tolist(), b.tolist()), rel=1e-12)
    assert metrics.mcd_dtw(a, a)[0] == 0.0


@pytest.mark.parametrize("n,m", [(1, 1), (1, 4), (3, 2), (4, 4), (5, 3)])
def test_dtw_matches_brute_force(rng, n, m):
    for _ in range(5):
        a, b = rng.standard_normal((n, 3)), rng.standard_normal((m, 3))
        value, path = metrics.mcd_dtw(a, b)
        ref, _ = dtw_brute_force(a.tolist(), b.tolist())
        assert value == pytest.approx(ref, rel=1e-9, abs=1e-12)
        assert tuple(map(tuple, path))[0] == (0, 0) and tuple(path[-1]) == (n - 1, m - 1)


def test_path_enumeration_counts():
    for n in range(1, 5):
        for m in range(1, 5):
            assert len(monotone_paths(n, m)) == delannoy(n - 1, m - 1)


def test_dtw_invariant_to_frame_duplication(rng):
    a = rng.standard_normal((5, 13))
    assert metrics.mcd_dtw(a, np.repeat(a, 2, axis=0))[0] == 0.0


def test_dtw_sl_scales_by_length_ratio(rng):
    a, b = rng.standard_normal((4, 13)), rng.standard_normal((6, 13))
    assert metrics.mcd_dtw_sl(a, b) == pytest.approx(metrics.mcd_dtw(a, b)[0] * 1.5, rel=1e-15)
    assert metrics.mcd_dtw_sl(a, b, coefficient=lambda x, y: 1.0) == metrics.mcd_dtw(a, b)[0]


def test_score_pair():
    rng = np.random.default_rng(3)
    x, y = rng.uniform(-80, 0, (5, 80)), rng.uniform(-80, 0, (7, 80))
    rep = metrics.score_pair(x, y)
    assert rep.mcd is None and rep.len_ratio == pytest.approx(1.4) and rep.finite()
    same = metrics.score_pair(x, x)
    assert same.mcd == 0.0 and same.mcd_dtw == 0.0 and same.path_len == 5


def _toy_mels(n=24, seed=0):
    rng = np.random.default_rng(seed)
    mels, emo, spk = [], [], []
    for i in range(n):
        e, s = i % 3, (i // 3) % 2
        m = rng.normal(0, 1, (rng.integers(4, 9), 16))
        m[:, e] += 4.0
        m[:, 8 + s] += 4.0
        mels.append(m)
        emo.append(e)
        spk.append(s)
    return mels, emo, spk


def test_classifiers_fit_save_load(tmp_path):
    mels, emo, spk = _toy_mels()
    clf = metrics.MelClassifiers(16, 3, 2).fit(mels, emo, spk, steps=150)
    emo_acc, id_acc = metrics.accuracy_eval(mels, emo, spk, clf)
    assert emo_acc == 1.0 and id_acc == 1.0
    clf.save(tmp_path / "clf.bin")
    again = metrics.MelClassifiers.load(tmp_path / "clf.bin")
    assert metrics.accuracy_eval(mels, emo, spk, str(tmp_path / "clf.bin")) == (emo_acc, id_acc)
    for a, b in zip(clf.predict(mels), again.predict(mels)):
        assert np.array_equal(a, b)


def test_classifier_errors(tmp_path):
    mels, emo, spk = _toy_mels(6)
    with pytest.raises(MissingModel):
        metrics.MelClassifiers.load(tmp_path / "none.bin")
    with pytest.raises(InvalidLabel):
        metrics.MelClassifiers(16, 3, 2).fit(mels, [5] * 6, spk, steps=1)
    with pytest.raises(EmptyInput):
        metrics.accuracy_eval([], [], [], metrics.MelClassifiers(16, 3, 2))


def test_classifier_masks_padding():
    torch.manual_seed(0)
    net = metrics.MelClassifier(4, 3).eval()
    x = torch.randn(1, 5, 4)
    padded = torch.cat([x, torch.randn(1, 3, 4)], 1)
    mask = torch.tensor([[True] * 5 + [False] * 3])
    assert torch.allclose(net(x, torch.ones(1, 5, dtype=torch.bool)), net(padded, mask), atol=1e-6)
