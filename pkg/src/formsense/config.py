"""Pipeline configuration: one JSON file, flag and environment overrides.

FORMSENSE_DATA_DIR provides the default root for data and output paths;
--seed / --exercise / --engine-variant flags override the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .engine import EngineParams, TrainConfig, VARIANTS
from .forest import ForestConfig, SearchSpace
from .model import ConfigError
from .preprocess import QualityGate, SmoothingConfig

# Per-rep smoothing needs a window that survives ~40-frame reps; the bare
# op default (0.1) is too narrow at that scope.
PIPELINE_SMOOTHING = SmoothingConfig(lowess_fraction=0.25, lowess_iterations=2)


@dataclass
class PipelineConfig:
    exercise: str = "squats"
    seed: int = 0
    data_dir: Path = Path("data")
    out_dir: Path = Path("out")
    engine_variant: str = "in"
    engine_path: Path | None = None
    forest_path: Path | None = None
    smoothing: SmoothingConfig = PIPELINE_SMOOTHING
    gate: QualityGate = field(default_factory=QualityGate)
    train: TrainConfig = field(default_factory=TrainConfig)
    engine: EngineParams = field(default_factory=EngineParams)
    forest: ForestConfig = field(default_factory=ForestConfig)
    search: SearchSpace = field(default_factory=SearchSpace)
    tune: bool = False
    eval_seeds: int = 5
    rig: dict = field(default_factory=dict)
    dataset: dict = field(default_factory=lambda: {
        "class_ids": [0, 1, 3], "reps_per_class": 45, "reps_per_session": 10})

    def __post_init__(self):
        if self.engine_variant not in VARIANTS:
            raise ConfigError(f"engine_variant must be one of {VARIANTS}")
        if self.eval_seeds < 1:
            raise ConfigError("eval_seeds must be >= 1")

    def resolved_engine_path(self) -> Path:
        return self.engine_path or self.out_dir / "engine.fse"

    def resolved_forest_path(self) -> Path:
        return self.forest_path or self.out_dir / "forest.fsf"


def _build(cls, payload: dict):
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ConfigError(f"bad {cls.__name__} section: {exc}") from None


def load_config(path: str | Path | None = None, *, seed: int | None = None,
                exercise: str | None = None, engine_variant: str | None = None,
                data_dir: str | None = None, out_dir: str | None = None) -> PipelineConfig:
    payload: dict = {}
    if path is not None:
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a JSON object")

    root = os.environ.get("FORMSENSE_DATA_DIR")
    base = Path(root) if root else Path(".")

    def pick_path(key: str, default: Path) -> Path:
        if key in payload:
            return Path(payload[key])
        return base / default

    search_payload = dict(payload.get("search", {}))
    for key in ("n_trees", "max_depth", "max_features", "min_samples_leaf"):
        if key in search_payload:
            search_payload[key] = tuple(search_payload[key])
    engine_payload = dict(payload.get("engine", {}))
    for key in ("relation_hidden", "object_hidden"):
        if key in engine_payload:
            engine_payload[key] = tuple(engine_payload[key])

    cfg = PipelineConfig(
        exercise=payload.get("exercise", "squats"),
        seed=int(payload.get("seed", 0)),
        data_dir=pick_path("data_dir", Path("data")),
        out_dir=pick_path("out_dir", Path("out")),
        engine_variant=payload.get("engine_variant", "in"),
        engine_path=Path(payload["engine_path"]) if "engine_path" in payload else None,
        forest_path=Path(payload["forest_path"]) if "forest_path" in payload else None,
        smoothing=_build(SmoothingConfig,
                         {"lowess_fraction": PIPELINE_SMOOTHING.lowess_fraction,
                          "lowess_iterations": PIPELINE_SMOOTHING.lowess_iterations,
                          **payload.get("smoothing", {})}),
        gate=_build(QualityGate, payload.get("gate", {})),
        train=_build(TrainConfig, payload.get("train", {})),
        engine=_build(EngineParams, engine_payload),
        forest=_build(ForestConfig, payload.get("forest", {})),
        search=_build(SearchSpace, search_payload),
        tune=bool(payload.get("tune", False)),
        eval_seeds=int(payload.get("eval_seeds", 5)),
        rig=dict(payload.get("rig", {})),
        dataset={**{"class_ids": [0, 1, 3], "reps_per_class": 45,
                    "reps_per_session": 10}, **payload.get("dataset", {})},
    )
    if seed is not None:
        cfg.seed = seed
        cfg.train = replace(cfg.train, seed=seed)
        cfg.forest = replace(cfg.forest, seed=seed)
    if exercise is not None:
        cfg.exercise = exercise
    if engine_variant is not None:
        cfg.engine_variant = engine_variant
    if data_dir is not None:
        cfg.data_dir = Path(data_dir)
    if out_dir is not None:
        cfg.out_dir = Path(out_dir)
    cfg.__post_init__()
    return cfg
