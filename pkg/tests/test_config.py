"""Тесты загрузки конфигурации: YAML, переменные окружения, JSON-переопределения конвейера."""

import json
from pathlib import Path

import pytest
from jsonschema import ValidationError

from project import CONFIG_PATH, init_logger
from project.config import apply_overrides, default_config, load_config, load_pipeline_config
from project.mvs.errors import ScheduleError
from project.mvs.schedule import SweepConfig
from project.synthetic.scene import SceneParams

MINIMAL_YAML = """
app:
  name: test-run
logger:
  format: "%(message)s"
"""


@pytest.fixture
def clean_env(monkeypatch):
    for key in ("LOG_LEVEL", "SATMVS_THREADS", "SATMVS_SEED"):
        monkeypatch.delenv(key, raising=False)
    return monkeypatch


def test_repository_config_loads(clean_env):
    """config.yaml из корня репозитория читается и даёт корректное расписание."""
    config = load_config(CONFIG_PATH)
    assert config.app.name == "satmvs-rpc"
    cfg = SweepConfig.from_config(config.sweep)
    assert cfg.scales == (0.0625, 0.25, 1.0)
    assert cfg.intervals == (None, 5.0, 2.5)
    assert config.pipeline.warping == "rpc"


def test_minimal_yaml_uses_section_defaults(tmp_path, clean_env):
    path = tmp_path / "config.yaml"
    path.write_text(MINIMAL_YAML)
    config = load_config(path)
    assert config.logger.level == "INFO"
    assert config.runtime.threads == 1
    assert config.sweep == default_config().sweep
    assert config.pipeline.block_size == 3000.0
    assert config.pinhole.fit_grid == [10, 10, 10]


def test_env_overrides(tmp_path, clean_env):
    """LOG_LEVEL и SATMVS_* перекрывают значения из файла."""
    path = tmp_path / "config.yaml"
    path.write_text(MINIMAL_YAML + "runtime:\n  threads: 2\n")
    clean_env.setenv("LOG_LEVEL", "DEBUG")
    clean_env.setenv("SATMVS_THREADS", "6")
    clean_env.setenv("SATMVS_SEED", "42")
    config = load_config(path)
    assert config.logger.level == "DEBUG"
    assert (config.runtime.threads, config.runtime.seed) == (6, 42)


def test_unknown_yaml_key_is_rejected(tmp_path, clean_env):
    path = tmp_path / "config.yaml"
    path.write_text(MINIMAL_YAML + "sweep:\n  planes: 3\n")
    with pytest.raises(TypeError):
        load_config(path)


def test_pipeline_overrides(tmp_path):
    path = tmp_path / "pipeline.json"
    path.write_text(
        json.dumps(
            {
                "sweep": {"plane_counts": [32, 16, 8], "temperature": 0.2},
                "pipeline": {"consistency_threshold": 0.5, "warping": "homography"},
                "threads": 3,
            }
        )
    )
    base = default_config()
    config = load_pipeline_config(path, base)
    assert config.sweep.plane_counts == [32, 16, 8]
    assert config.sweep.temperature == 0.2
    assert config.sweep.scales == base.sweep.scales
    assert config.pipeline.consistency_threshold == 0.5
    assert config.pipeline.warping == "homography"
    assert config.runtime.threads == 3
    assert base.runtime.threads == 1


@pytest.mark.parametrize(
    "overrides",
    [
        {"sweep": {"planes": 3}},
        {"pipeline": {"warping": "affine"}},
        {"pipeline": {"consistency_threshold": 0}},
        {"sweep": {"intervals": [None, -1.0, 2.5]}},
        {"threads": 0},
        {"extra": True},
    ],
)
def test_pipeline_overrides_are_validated(overrides):
    with pytest.raises(ValidationError):
        apply_overrides(default_config(), overrides)


def test_schedule_errors_surface_from_config():
    config = apply_overrides(default_config(), {"sweep": {"plane_counts": [8, 8]}})
    with pytest.raises(ScheduleError):
        SweepConfig.from_config(config.sweep)


def test_sweep_config_overrides_skip_none():
    cfg = SweepConfig.from_config(default_config().sweep, temperature=None, plane_counts=(16, 8, 4))
    assert cfg.temperature == 1.0
    assert cfg.plane_counts == (16, 8, 4)


def test_scene_params_from_config():
    params = SceneParams.from_config(default_config().synthetic, size_px=64, view_angles=(0.0, 10.0))
    assert params.size_px == 64
    assert params.view_angles == (0.0, 10.0)
    assert params.relief == 300.0
    assert params.texture_seed is None


def test_init_logger_without_config():
    logger = init_logger(None)
    assert logger.name == "project"
    assert init_logger(default_config()).name == "satmvs-rpc"


def test_config_path_points_to_repository_root():
    assert CONFIG_PATH.name == "config.yaml"
    assert Path(CONFIG_PATH).parent == Path(__file__).parent.parent
