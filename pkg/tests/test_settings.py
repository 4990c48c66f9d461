import json
from pathlib import Path

import pytest

from framelab.settings import Config, config


def test_bundled_settings_validate():
    assert config.validate() is True
    assert config.get("MEASURES", "min_grid") == 16
    assert len(config.PRESETS) == 11


def test_get_prefers_override():
    assert config.get("FRAMES", "dense_cap", 64) == 64
    assert config.get("FRAMES", "dense_cap") == 512


def test_get_missing_key():
    with pytest.raises(KeyError):
        config.get("FRAMES", "no_such_key")


def test_missing_sections_fail_validation(tmp_path):
    path = tmp_path / "settings.json"
    path.write_text(json.dumps({"MEASURES": {"min_grid": 16}}), encoding="utf-8")
    with pytest.raises(ValueError, match="Missing required settings"):
        Config(json_config=path).validate()


def test_bad_growth_factor(tmp_path):
    data = json.loads(Path(config.SETTINGS_FILE).read_text(encoding="utf-8"))
    data["MEASURES"]["growth_factor"] = 1.0
    path = tmp_path / "settings.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ValueError, match="growth_factor"):
        Config(json_config=path).validate()


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("FRAMELAB_SEED", "42")
    monkeypatch.setenv("FRAMELAB_LOG_LEVEL", "debug")
    monkeypatch.setenv("FRAMELAB_OUT", "elsewhere")
    cfg = Config()
    assert cfg.SEED == 42
    assert cfg.LOG_LEVEL == "DEBUG"
    assert cfg.OUT_DIR == "elsewhere"
