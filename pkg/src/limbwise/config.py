"""Run configuration: one JSON file drives every CLI command.

Flags override file values; built-in defaults fill the rest.  The seed is
deliberately mandatory (never wall-clock derived) so any run can be
reproduced from its config alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .boosting import TrainConfig, UNWEIGHTED_CONFIG, WEIGHTED_CONFIG
from .core import ConfigError, Limb, Provenance
from .evaluation import PipelineConfig
from .ingest import default_column_map

DEFAULT_SYNTH_CLASSES = ("null", "jogging", "burpees", "lunges")


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 10
    classes: tuple[str, ...] = DEFAULT_SYNTH_CLASSES
    seconds_per_class: float = 60.0

    def __post_init__(self) -> None:
        if self.n_subjects < 1:
            raise ConfigError("synth.n_subjects must be at least 1")
        if not self.classes:
            raise ConfigError("synth.classes must not be empty")


@dataclass(frozen=True)
class RunConfig:
    seed: int
    rate: float = 50.0
    window_seconds: float = 1.0
    overlap: float = 0.0
    limb: Limb = Limb.ARM
    inputs: tuple[str, ...] = ()
    column_map: dict = field(default_factory=default_column_map)
    labels: tuple[str, ...] | None = None
    augmentation: tuple[Provenance, ...] = (Provenance.INVERTED, Provenance.ROTATED)
    n_quantiles: int = 1000
    weighted: TrainConfig = WEIGHTED_CONFIG
    unweighted: TrainConfig = UNWEIGHTED_CONFIG
    k_folds: int = 5
    threads: int = 1
    output_dir: str = "out"
    synth: SynthConfig = SynthConfig()

    def __post_init__(self) -> None:
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be at least 2")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError("overlap must be in [0, 1)")

    def pipeline_config(self) -> PipelineConfig:
        return PipelineConfig(
            k_folds=self.k_folds,
            seed=self.seed,
            rate=self.rate,
            augmentation=self.augmentation,
            n_quantiles=self.n_quantiles,
            weighted=self.weighted,
            unweighted=self.unweighted,
            threads=self.threads,
        )

    def require_inputs(self) -> tuple[Path, ...]:
        if not self.inputs:
            raise ConfigError("no input files configured")
        paths = tuple(Path(p) for p in self.inputs)
        for p in paths:
            if not p.exists():
                raise ConfigError(f"input file does not exist: {p}")
        return paths


def _train_config(raw: Mapping[str, Any] | None, base: TrainConfig) -> TrainConfig:
    if not raw:
        return base
    merged = base.to_json_dict()
    unknown = set(raw) - set(merged)
    if unknown:
        raise ConfigError(f"unknown booster config keys: {sorted(unknown)}")
    merged.update(raw)
    return TrainConfig(**merged)


def load_run_config(
    path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus flag overrides."""
    raw: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file does not exist: {p}")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a JSON object")

    overrides = dict(overrides or {})
    overrides = {k: v for k, v in overrides.items() if v is not None}

    def pick(key: str, default: Any) -> Any:
        if key in overrides:
            return overrides[key]
        return raw.get(key, default)

    seed = pick("seed", None)
    if seed is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")

    norm = raw.get("normalization") or {}
    boosters = raw.get("boosters") or {}
    try:
        augmentation = tuple(
            Provenance(v) for v in pick("augmentation", ["inverted", "rotated"])
        )
        limb = Limb(pick("limb", "arm"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    labels = raw.get("labels")
    synth_raw = raw.get("synth") or {}
    try:
        return RunConfig(
            seed=int(seed),
            rate=float(pick("rate", 50.0)),
            window_seconds=float(pick("window_seconds", 1.0)),
            overlap=float(pick("overlap", 0.0)),
            limb=limb,
            inputs=tuple(pick("inputs", [])),
            column_map=raw.get("column_map") or default_column_map(),
            labels=tuple(labels) if labels else None,
            augmentation=augmentation,
            n_quantiles=int(pick("n_quantiles", norm.get("n_quantiles", 1000))),
            weighted=_train_config(boosters.get("weighted"), WEIGHTED_CONFIG),
            unweighted=_train_config(boosters.get("unweighted"), UNWEIGHTED_CONFIG),
            k_folds=int(pick("k_folds", 5)),
            threads=int(pick("threads", 1)),
            output_dir=str(pick("output_dir", "out")),
            synth=SynthConfig(
                n_subjects=int(pick("n_subjects", synth_raw.get("n_subjects", 10))),
                classes=tuple(synth_raw.get("classes", DEFAULT_SYNTH_CLASSES)),
                seconds_per_class=float(
                    synth_raw.get("seconds_per_class", 60.0)
                ),
            ),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
