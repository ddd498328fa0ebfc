from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare, pearsonr

from hpm.aligner import frame_ratio
from hpm.data import Dataset
from hpm.errors import InvalidConfig
from hpm.formats import directory_digest, read_manifest
from hpm.synth import SPLIT_RATIOS, SyntheticSpec, assign_splits, draw_labels, generate_dataset, spec_from_manifest

FAST = SyntheticSpec(n_samples=4, seed=7, min_frames=6, max_frames=8, lip_size=16, scene_dim=12)


def test_generation_is_byte_identical(tmp_path):
    generate_dataset(FAST, tmp_path / "a")
    generate_dataset(FAST, tmp_path / "b")
    assert directory_digest(tmp_path / "a") == directory_digest(tmp_path / "b")
    assert spec_from_manifest(tmp_path / "a") == FAST


def test_seed_changes_output(tmp_path):
    generate_dataset(FAST, tmp_path / "a")
    generate_dataset(replace(FAST, seed=8), tmp_path / "b")
    assert directory_digest(tmp_path / "a") != directory_digest(tmp_path / "b")


def test_emotion_labels_cover_all_classes():
    _, emotions, speakers, _ = draw_labels(replace(FAST, n_samples=800, scene_dim=4))
    counts = np.bincount(emotions, minlength=8)
    assert np.all(counts > 0)
    assert chisquare(counts).pvalue > 0.05
    assert set(speakers.tolist()) == set(range(FAST.n_speakers))


@pytest.mark.parametrize("n", [1, 5, 10, 32, 33, 100])
def test_split_ratios_within_one(n):
    labels = list(np.random.default_rng(n).integers(0, 8, n))
    splits = assign_splits(labels)
    for name, ratio in SPLIT_RATIOS:
        assert abs(splits.count(name) - ratio * n) <= 1
    assert len(splits) == n


def test_manifest_splits_disjoint(small_dataset):
    _, entries = read_manifest(small_dataset)
    ids = [e["id"] for e in entries]
    assert len(ids) == len(set(ids)) == 8


@pytest.mark.parametrize("field,value", [("fps", 0), ("sr", -1), ("n_emotions", 4), ("min_frames", 20),
                                         ("n_speakers", 9), ("seed", -1)])
def test_invalid_spec(field, value):
    with pytest.raises(InvalidConfig):
        replace(FAST, **{field: value}).validate()


def test_lengths_follow_frame_ratio(small_dataset):
    ratio = frame_ratio(16000, 200, 20)
    for s in Dataset(small_dataset, None).samples:
        assert len(s["mel"]) == ratio.mel_length(len(s["arousal"]))


def test_arousal_tracks_energy(small_dataset):
    for s in Dataset(small_dataset, None).samples:
        n = len(s["energy"])
        r = n / len(s["arousal"])
        a = s["arousal"][np.minimum((np.arange(n) / r).astype(int), len(s["arousal"]) - 1)]
        assert pearsonr(a, s["energy"])[0] > 0.8
