import pytest

from hpm import config
from hpm.config import ABLATION_PRESETS, Config
from hpm.errors import InvalidConfig


def test_defaults_and_types():
    cfg = Config()
    assert cfg["model.d_model"] == 256 and cfg["train.eps"] == 1e-9
    assert cfg.learning_rate == 1e-4


def test_text_round_trip():
    cfg = Config().with_size("desk").with_preset("no-pa")
    assert config.loads(cfg.dumps()) == cfg
    assert config.loads(cfg.dumps()).hash() == cfg.hash()


def test_parse_comments_and_bools():
    vals = config.parse_text("# comment\nadaptor.enabled = off  # trailing\nmodel.d_model=32\n")
    assert vals == {"adaptor.enabled": False, "model.d_model": 32}


@pytest.mark.parametrize("text", ["nope = 1", "model.d_model = x", "aligner.expansion = spline",
                                  "adaptor.enabled = maybe", "no equals sign", "model.d_model = 2.5"])
def test_bad_text_rejected(text):
    with pytest.raises(InvalidConfig):
        config.parse_text(text)


def test_consistency_checks():
    with pytest.raises(InvalidConfig):
        Config({"model.d_model": 30})
    with pytest.raises(InvalidConfig):
        Config({"audio.fps": 0})


def test_load_order(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("model.d_model = 32\nadaptor.enabled = false\n")
    cfg = config.load(path, overrides=["adaptor.enabled=true"], size="desk", preset="no-ab")
    assert cfg["model.d_model"] == 32  # file beats size
    assert cfg["adaptor.enabled"] is True  # --set beats file
    assert cfg["booster.enabled"] is False
    with pytest.raises(InvalidConfig):
        config.load(tmp_path / "missing.cfg")


@pytest.mark.parametrize("name", sorted(ABLATION_PRESETS))
def test_presets_apply(name):
    cfg = Config().with_preset(name)
    for key, value in ABLATION_PRESETS[name].items():
        assert cfg[key] == value


def test_unknown_preset_and_size():
    with pytest.raises(InvalidConfig):
        Config().with_preset("no-everything")
    with pytest.raises(InvalidConfig):
        Config().with_size("huge")


def test_lr_presets():
    assert Config({"train.lr_preset": "v2c"}).learning_rate == 1e-5
    assert Config({"train.lr_preset": "chem"}).learning_rate == 5e-5
