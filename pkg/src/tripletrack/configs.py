"""Flat key=value configuration files with dotted section keys.

Example::

    # tracking
    tracker.gate_threshold = 0.59
    miner.buffer_length = 19
    trainer.learning_rate = 1e-3
    model.input = 32x32x3
    model.layers = conv:8x3:p1,relu,pool:2,conv:16x3:p1,relu,pool:2,flatten,dense:64
    pipeline.mode = online
    synth.num_objects = 8
    eval.iou_threshold = 0.5

Values are coerced by the target field's type. Unknown keys are errors.
Command-line overrides (--set key=value) win over the file; --seed wins
over the file for model.seed, miner.seed, and synth.seed but loses to an
explicit --set.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import ConfigError
from .evaluation import EvalConfig
from .mining import MinerConfig
from .model import ModelConfig, TrainerConfig, parse_layers
from .pipeline import PipelineConfig
from .synthetic import SynthConfig
from .tracker import TrackerConfig


def parse_config_text(text: str) -> dict[str, str]:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        kv[key.strip()] = value.strip()
    return kv


def load_config_file(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def parse_overrides(pairs: list[str]) -> dict[str, str]:
    kv: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must be key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        kv[key.strip()] = value.strip()
    return kv


def merge_config(
    file_kv: dict[str, str], seed: int | None, overrides: dict[str, str]
) -> dict[str, str]:
    kv = dict(file_kv)
    if seed is not None:
        for key in ("model.seed", "miner.seed", "synth.seed"):
            kv[key] = str(seed)
    kv.update(overrides)
    return kv


def _coerce(value: str, typ, key: str):
    try:
        if typ is bool:
            low = value.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
        return value
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def _section(kv: dict[str, str], name: str) -> dict[str, str]:
    prefix = name + "."
    return {k[len(prefix) :]: v for k, v in kv.items() if k.startswith(prefix)}


def _field_type(cls, name: str):
    # Dataclass field types arrive as strings under `from __future__ import
    # annotations`; all coercible config fields are plain builtins.
    hints = {f.name: f.type for f in dataclasses.fields(cls)}
    t = hints[name]
    if isinstance(t, str):
        return {"int": int, "float": float, "bool": bool, "str": str}.get(t, str)
    return t


def _build(cls, section: dict[str, str], section_name: str, special=None):
    special = special or {}
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in section.items():
        if key in special:
            name, converted = special[key](value)
            kwargs[name] = converted
            continue
        if key not in fields:
            raise ConfigError(f"unknown config key {section_name}.{key}")
        kwargs[key] = _coerce(value, _field_type(cls, key), f"{section_name}.{key}")
    return cls(**kwargs)


def _parse_input_shape(value: str):
    parts = value.lower().split("x")
    if len(parts) != 3:
        raise ConfigError(f"model.input must be HxWxC, got {value!r}")
    h, w, c = (int(p) for p in parts)
    return "input_shape", (h, w, c)


def _parse_layer_list(value: str):
    return "layers", parse_layers(value)


def make_model_config(kv: dict[str, str]) -> ModelConfig:
    return _build(
        ModelConfig,
        _section(kv, "model"),
        "model",
        special={"input": _parse_input_shape, "layers": _parse_layer_list},
    )


def make_pipeline_config(kv: dict[str, str]) -> PipelineConfig:
    known_sections = {"model", "tracker", "miner", "trainer", "pipeline", "synth", "eval"}
    for key in kv:
        section = key.split(".", 1)[0]
        if section not in known_sections:
            raise ConfigError(f"unknown config section in key {key!r}")
    pipe = _section(kv, "pipeline")
    mode = pipe.pop("mode", "online")
    reset = _coerce(pipe.pop("reset_model_per_sequence", "true"), bool, "pipeline.reset_model_per_sequence")
    if pipe:
        raise ConfigError(f"unknown config key pipeline.{next(iter(pipe))}")
    return PipelineConfig(
        model=make_model_config(kv),
        tracker=_build(TrackerConfig, _section(kv, "tracker"), "tracker"),
        miner=_build(MinerConfig, _section(kv, "miner"), "miner"),
        trainer=_build(TrainerConfig, _section(kv, "trainer"), "trainer"),
        mode=mode,
        reset_model_per_sequence=reset,
    )


def make_synth_config(kv: dict[str, str]) -> SynthConfig:
    return _build(SynthConfig, _section(kv, "synth"), "synth")


def make_eval_config(kv: dict[str, str]) -> EvalConfig:
    return _build(EvalConfig, _section(kv, "eval"), "eval")
