import dataclasses

import pytest

from asnet.config import ABLATION_PRESETS, TrackerConfig, config_from_dict, load_config
from asnet.errors import ParameterError


def test_defaults():
    cfg = TrackerConfig()
    assert (cfg.template_size, cfg.pad_factor, cfg.cell_size) == (64, 2.0, 2)
    assert cfg.scale_steps == (0.975, 1.0, 1.025) and cfg.scale_penalty == 0.97
    assert cfg.redetect.enabled and cfg.sharing and cfg.view_fusion


@pytest.mark.parametrize("kw", [dict(template_size=63), dict(cell_size=0), dict(pad_factor=0.5),
                                dict(lambda_m=-1), dict(scale_steps=()), dict(scale_penalty=0),
                                dict(normalization="l1"), dict(feature_norm="l2"), dict(suppression_sigma=0)])
def test_invalid_configs(kw):
    with pytest.raises(ParameterError):
        TrackerConfig(**kw)


def test_load_dotted_toml(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("template_size = 32\nscale_steps = [1.0]\nredetect.lambda = 3.0\nredetect.enabled = false\n")
    cfg = load_config(p)
    assert cfg.template_size == 32 and cfg.scale_steps == (1.0,)
    assert cfg.redetect.lambda_ == 3.0 and not cfg.redetect.enabled


def test_unknown_keys_and_bad_syntax(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("templat_size = 32\nredetect.foo = 1\n")
    with pytest.raises(ParameterError, match="templat_size.*redetect.foo"):
        load_config(p)
    p.write_text("template_size = = 3\n")
    with pytest.raises(ParameterError, match="c.toml"):
        load_config(p)


def test_dict_round_trip_and_fingerprint():
    cfg = TrackerConfig(lambda_m=0.3).with_ablation(redetect=False)
    assert config_from_dict(cfg.to_dict()) == cfg
    assert cfg.fingerprint() == config_from_dict(cfg.to_dict()).fingerprint()
    assert cfg.fingerprint() != TrackerConfig().fingerprint()


def test_ablation_presets_cover_all_switch_combinations():
    assert len(ABLATION_PRESETS) == 8
    assert set(ABLATION_PRESETS.values()) == {(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)}
    assert ABLATION_PRESETS["asnet"] == (True, True, True)
    assert ABLATION_PRESETS["dsiam"] == (False, False, False)


def test_with_ablation_leaves_other_fields():
    cfg = TrackerConfig(lambda_w=0.5).with_ablation(sharing=False, view_fusion=False)
    assert cfg.lambda_w == 0.5 and not cfg.sharing and not cfg.view_fusion and cfg.redetect.enabled
    assert dataclasses.replace(cfg, sharing=True).sharing
