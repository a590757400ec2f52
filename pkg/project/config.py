import json
import os
from dataclasses import replace
from pathlib import Path
from typing import Any

import yaml
from jsonschema import validate

from project.schemas.config_schemas import (
    AppSection,
    Config,
    LoggerSection,
    PinholeSection,
    PipelineSection,
    RuntimeSection,
    SweepSection,
    SyntheticSection,
)
from project.schemas.json_schemas import PIPELINE_CONFIG_SCHEMA


def load_config(path: Path) -> Config:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    data = _apply_env_overrides(raw)
    return Config(
        app=AppSection(**data["app"]),
        logger=LoggerSection(**data["logger"]),
        runtime=RuntimeSection(**data.get("runtime", {})),
        sweep=SweepSection(**data.get("sweep", {})),
        pipeline=PipelineSection(**data.get("pipeline", {})),
        pinhole=PinholeSection(**data.get("pinhole", {})),
        synthetic=SyntheticSection(**data.get("synthetic", {})),
    )


def default_config() -> Config:
    """Конфигурация по умолчанию, если config.yaml недоступен."""
    return Config(
        app=AppSection(name="satmvs-rpc"),
        logger=LoggerSection(format="%(levelname)s %(name)s: %(message)s"),
        runtime=RuntimeSection(),
        sweep=SweepSection(),
        pipeline=PipelineSection(),
        pinhole=PinholeSection(),
        synthetic=SyntheticSection(),
    )


def _apply_env_overrides(data: dict[str, Any]) -> dict[str, Any]:
    logger_level = os.getenv("LOG_LEVEL")
    if logger_level:
        data.setdefault("logger", {})["level"] = logger_level

    runtime = data.setdefault("runtime", {})
    mapping = {
        "threads": "SATMVS_THREADS",
        "seed": "SATMVS_SEED",
    }
    for key, env_key in mapping.items():
        value = os.getenv(env_key)
        if value is None:
            continue
        runtime[key] = int(value)

    return data


def apply_overrides(config: Config, overrides: dict[str, Any]) -> Config:
    """Merge a validated pipeline JSON config over the YAML sections."""
    validate(instance=overrides, schema=PIPELINE_CONFIG_SCHEMA)
    sweep = replace(config.sweep, **overrides.get("sweep", {}))
    pipeline = replace(config.pipeline, **overrides.get("pipeline", {}))
    runtime = config.runtime
    if "threads" in overrides:
        runtime = replace(runtime, threads=int(overrides["threads"]))
    return replace(config, sweep=sweep, pipeline=pipeline, runtime=runtime)


def load_pipeline_config(path: Path, config: Config) -> Config:
    """Read a pipeline JSON config; unknown keys are rejected by the schema."""
    overrides = json.loads(Path(path).read_text())
    return apply_overrides(config, overrides)
