"""Run configuration: TOML parsing, presets and cross-field validation."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from textless.audio import FeatureConfig
from textless.models.encoder import EncoderConfig
from textless.models.vocoder import VocoderConfig
from textless.schedules import ScheduleConfig, multistep_preset, oclr_preset
from textless.upsample import ScaleChainError


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataConfig:
    manifest: Optional[str] = None  # JSON Lines; synthetic corpus when unset
    n_speakers: int = 4
    utts_per_speaker: int = 24
    test_per_speaker: int = 4
    min_units: int = 40
    max_units: int = 60
    # split utterances into chunks of about this many seconds (unit-aligned) when set
    chunk_seconds: Optional[float] = None

    def __post_init__(self):
        if self.chunk_seconds is not None and self.chunk_seconds <= 0:
            raise ValueError("chunk_seconds must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    clip_norm: float = 1.0
    log_every: int = 10
    checkpoint_every: int = 0
    lrrt_start_lr: float = 1e-5
    lrrt_end_lr: float = 1.0
    lrrt_step_rate: int = 5
    lrrt_num_lrs: int = 100
    unit_source: str = "encoder"  # encoder | ground_truth


@dataclass(frozen=True)
class EvalConfig:
    frame_metric: str = "cosine"
    abx_max_items_per_group: int = 20
    temperature: float = 0.0
    collapse_runs: bool = False


@dataclass(frozen=True)
class RunConfig:
    preset: str = "toy"
    seed: int = 0
    data: DataConfig = field(default_factory=DataConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)
    scheduler: ScheduleConfig = field(default_factory=ScheduleConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scheduler"]["milestones"] = list(self.scheduler.milestones)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


SECTIONS = {
    "data": DataConfig, "features": FeatureConfig, "encoder": EncoderConfig,
    "vocoder": VocoderConfig, "scheduler": ScheduleConfig, "train": TrainConfig,
    "eval": EvalConfig,
}

# Full-scale geometry: (s1, s2, hop, frames, upsampler)
_GEOMETRY = {
    "2:160": (2, 160, 160, 32, "nearest"),
    "16:20": (16, 20, 160, 32, "nearest"),
    "fourier": (16, 16, 128, 64, "fourier_pad"),
    "10:16": (10, 16, 80, 102, "nearest"),
}


def _full_scale(geometry, schedule, n_speakers=102):
    s1, s2, hop, frames, up = _GEOMETRY[geometry]
    return {
        "features": {"sample_rate": 16000, "hop": hop, "n_mels": 80, "win_ms": 40.0,
                     "n_fft": 1024},
        "vocoder": {"s1": s1, "s2": s2, "hop": hop, "frames": frames, "upsample1": up,
                    "upsample2": up, "sample_rate": 16000, "n_speakers": n_speakers},
        "scheduler": schedule.to_dict(),
    }


TOY_HOP = 16


def _toy(schedule):
    return {
        "features": {"sample_rate": 4000, "hop": TOY_HOP, "n_mels": 20, "win_ms": 16.0,
                     "n_fft": 64},
        "encoder": {"n_mels": 20, "channels": 32, "z_dim": 8, "n_codes": 32,
                    "context_dim": 32, "frames": 32, "steps": 500, "max_lr": 1e-2},
        "vocoder": {"n_codes": 32, "code_dim": 16, "n_speakers": 4, "speaker_dim": 8,
                    "s1": 4, "s2": 8, "hop": TOY_HOP, "lstm_hidden": 32, "head_hidden": 64,
                    "frames": 32, "sample_rate": 4000},
        "scheduler": schedule.to_dict(),
    }


TOY_MULTISTEP_STEPS = 1000
# Toy peak LR from the toy vocoder's LR range test (descent region, below explosion).
TOY_OCLR_MAX_LR = 1e-2


def toy_oclr(total_steps=round(0.3 * TOY_MULTISTEP_STEPS)):
    return oclr_preset(total_steps, max_lr=TOY_OCLR_MAX_LR)


PRESETS = {
    "baseline": _full_scale("2:160", multistep_preset(160_000)),
    "table1-oclr-30k": _full_scale("16:20", oclr_preset(30_000)),
    "table1-oclr-60k": _full_scale("16:20", oclr_preset(60_000)),
    "table2-row0": _full_scale("2:160", multistep_preset(160_000)),
    "table2-row1": _full_scale("16:20", oclr_preset(30_000)),
    "table2-row2": _full_scale("16:20", oclr_preset(40_000)),
    "table2-row3": _full_scale("16:20", oclr_preset(60_000)),
    "table2-row4": _full_scale("fourier", oclr_preset(60_000)),
    "table2-row5": _full_scale("10:16", oclr_preset(60_000)),
    "table3-row0": _full_scale("2:160", oclr_preset(30_000), 112),
    "table3-row1": _full_scale("16:20", oclr_preset(30_000), 112),
    "table3-row2": _full_scale("fourier", oclr_preset(30_000), 112),
    "table3-row3": _full_scale("10:16", oclr_preset(30_000), 112),
    "table4-row0": _full_scale("2:160", oclr_preset(30_000), 500),
    "table4-row1": _full_scale("fourier", oclr_preset(30_000), 500),
    "table4-row2": _full_scale("10:16", oclr_preset(30_000), 500),
    "alt-24k": {
        "features": {"sample_rate": 24000, "hop": 300, "n_mels": 80, "win_ms": 40.0,
                     "n_fft": 1024, "fmax": 12000.0},
        "vocoder": {"s1": 2, "s2": 300, "hop": 300, "frames": 32, "sample_rate": 24000},
        "scheduler": oclr_preset(30_000).to_dict(),
    },
    "toy": _toy(toy_oclr()),
    "toy-multistep": _toy(multistep_preset(TOY_MULTISTEP_STEPS)),
}
PRESETS["best-en"] = PRESETS["table2-row5"]


def _merge(base, override):
    out = {k: dict(v) if isinstance(v, dict) else v for k, v in base.items()}
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def build_config(raw: dict, strict: bool = True) -> RunConfig:
    """Expand the preset, overlay ``raw`` and validate every section."""
    raw = dict(raw)
    preset = raw.pop("preset", "toy")
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}; known: {sorted(PRESETS)}")
    merged = _merge(PRESETS[preset], raw)
    seed = merged.pop("seed", 0)
    kwargs = {}
    for name, cls in SECTIONS.items():
        values = dict(merged.pop(name, {}) or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown and strict:
            raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
        values = {k: v for k, v in values.items() if k in known}
        if "milestones" in values:
            values["milestones"] = tuple(values["milestones"])
        try:
            kwargs[name] = cls(**values)
        except ScaleChainError as exc:
            raise ConfigError(f"{name}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: {exc}") from exc
    if merged and strict:
        raise ConfigError(f"unknown top-level keys {sorted(merged)}")
    cfg = RunConfig(preset=preset, seed=int(seed), **kwargs)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    f, v = cfg.features, cfg.vocoder
    if v.hop != f.hop:
        raise ConfigError(f"vocoder.hop: {v.hop} differs from features.hop {f.hop}")
    if v.sample_rate != f.sample_rate:
        raise ConfigError(f"vocoder.sample_rate: {v.sample_rate} differs from features.sample_rate "
                          f"{f.sample_rate}")
    if v.frames * f.hop < f.win_length:
        raise ConfigError(f"vocoder.frames: window of {v.frames} frames at hop {f.hop} is "
                          f"shorter than one analysis window")
    if cfg.encoder.n_mels != f.n_mels:
        raise ConfigError(f"encoder.n_mels: {cfg.encoder.n_mels} differs from features.n_mels "
                          f"{f.n_mels}")
    if cfg.scheduler.total_steps <= 0:
        raise ConfigError("scheduler.total_steps: must be > 0")
    if cfg.train.unit_source not in ("encoder", "ground_truth"):
        raise ConfigError("train.unit_source: must be 'encoder' or 'ground_truth'")


def parse_config(path=None, preset=None, overrides=None, strict=True) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    if preset is not None:
        raw["preset"] = preset
    for key, value in (overrides or {}).items():
        section, _, name = key.partition(".")
        if name:
            raw.setdefault(section, {})[name] = value
        else:
            raw[section] = value
    return build_config(raw, strict=strict)
