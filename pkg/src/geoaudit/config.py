"""Experiment configuration: one INI-style file fully determines a run.

Sections (all optional except ``[data]``)::

    [data]      source = adult | xor | csv, path, test_path, features, ...
    [schema]    target, positive_label, target_position, header   (csv only)
    [columns]   name = numeric | categorical: A, B, C              (csv only)
    [train]     seed, epochs, batch_size, probe_learning_rate, mlp_learning_rate, init_scale
    [capacity]  widths, seeds_per_point, aggregation, delta, final_width, n_jobs
    [stress]    scenarios = name, name ...   (each a [scenario:name] section)
    [baselines] l1, l1_lambda, jtt, upweight_factor, phase1_epochs, phase2_epochs
    [run]       stages, output_dir
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .adult import ADULT_SCHEMA, DEFAULT_FEATURES
from .baselines import JttConfig
from .dataprep import ColumnSpec, FeatureSchema, resolve_features
from .errors import ConfigError, DataError
from .nncore import TrainConfig
from .stresstest import DEFAULT_SCENARIOS, StressScenario

STAGES = ("audit", "sweep", "stress", "baselines")
DEFAULT_WIDTHS = (1, 2, 4, 8, 16, 32, 64)


@dataclass(frozen=True)
class ExperimentConfig:
    source: str = "adult"
    path: str | None = None
    test_path: str | None = None
    schema: FeatureSchema | None = None
    feature_list: tuple[str, ...] = DEFAULT_FEATURES
    has_header: bool = False
    train_fraction: float = 0.8
    split_seed: int = 0
    xor_n: int = 2000
    xor_leak_rate: float = 1.0
    xor_noise_std: float = 0.0
    probe: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.1))
    mlp: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.05))
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    seeds_per_point: int = 3
    aggregation: str = "mean"
    delta: float = 0.01
    final_width: int = 32
    n_jobs: int = 1
    scenarios: tuple[StressScenario, ...] = DEFAULT_SCENARIOS
    l1_enabled: bool = True
    l1_lambda: float = 0.05
    jtt_enabled: bool = True
    jtt: JttConfig = field(default_factory=JttConfig)
    output_dir: str = "runs/latest"
    stages: tuple[str, ...] = STAGES

    @property
    def seed(self) -> int:
        return self.probe.seed

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None,
                       stages: Sequence[str] | None = None) -> "ExperimentConfig":
        changes: dict = {}
        if seed is not None:
            changes["probe"] = self.probe.replace(seed=seed)
            changes["mlp"] = self.mlp.replace(seed=seed)
        if output_dir is not None:
            changes["output_dir"] = str(output_dir)
        if stages is not None:
            changes["stages"] = tuple(stages)
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def resolved_schema(self) -> FeatureSchema | None:
        if self.source == "adult":
            return self.schema or ADULT_SCHEMA
        return self.schema

    def validate(self) -> None:
        if self.source not in ("adult", "xor", "csv"):
            raise ConfigError(f"unknown data source {self.source!r}")
        if self.source in ("adult", "csv") and not self.path:
            raise ConfigError(f"data source {self.source!r} needs a path")
        if self.source == "csv" and self.schema is None:
            raise ConfigError("data source 'csv' needs [schema] and [columns] sections")
        schema = self.resolved_schema()
        if schema is not None:
            try:
                resolve_features(schema, self.feature_list)
            except DataError as exc:
                raise ConfigError(str(exc)) from None
        unknown = set(self.stages).difference(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        if not self.widths or any(w < 1 for w in self.widths):
            raise ConfigError("widths must be positive integers")
        if list(self.widths) != sorted(set(self.widths)):
            raise ConfigError("widths must be strictly increasing")
        if self.aggregation not in ("mean", "best"):
            raise ConfigError(f"aggregation must be 'mean' or 'best', got {self.aggregation!r}")
        if self.final_width < 1 or self.seeds_per_point < 1:
            raise ConfigError("final_width and seeds_per_point must be >= 1")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        out = Path(self.output_dir)
        if out.exists() and not out.is_dir():
            raise ConfigError(f"output path {out} exists and is not a directory")

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _split_list(text: str) -> list[str]:
    return [item.strip() for item in text.replace("\n", ",").split(",") if item.strip()]


def _schema(parser: configparser.ConfigParser) -> FeatureSchema | None:
    if not parser.has_section("columns"):
        return None
    cols = []
    for name, spec in parser.items("columns"):
        kind, _, cats = spec.partition(":")
        kind = kind.strip()
        try:
            cols.append(ColumnSpec(name, kind, tuple(_split_list(cats))))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    sec = parser["schema"] if parser.has_section("schema") else {}
    if "target" not in sec or "positive_label" not in sec:
        raise ConfigError("[schema] needs 'target' and 'positive_label'")
    try:
        return FeatureSchema(tuple(cols), sec["target"], sec["positive_label"],
                             int(sec.get("target_position", "-1")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _scenarios(parser: configparser.ConfigParser) -> tuple[StressScenario, ...]:
    if not parser.has_option("stress", "scenarios"):
        return DEFAULT_SCENARIOS
    out = []
    defaults = {s.name: s for s in DEFAULT_SCENARIOS}
    for name in _split_list(parser.get("stress", "scenarios")):
        section = f"scenario:{name}"
        if not parser.has_section(section):
            if name in defaults:
                out.append(defaults[name])
                continue
            raise ConfigError(f"scenario {name!r} has no [{section}] section")
        sec = parser[section]
        try:
            out.append(StressScenario(
                name=name,
                kind=sec.get("kind", "inject"),
                feature=sec["feature"],
                raw_value=sec.getfloat("raw_value", 0.0),
                category=sec.get("category", ""),
                selector=sec.get("selector", "all"),
            ))
        except KeyError as exc:
            raise ConfigError(f"[{section}] is missing {exc}") from None
    return tuple(out)


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse an experiment file; relative data paths resolve against its directory."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    if not parser.has_section("data"):
        raise ConfigError("config needs a [data] section")
    base = path.parent

    def rel(value: str | None) -> str | None:
        if not value:
            return None
        p = Path(value)
        return str(p if p.is_absolute() else base / p)

    try:
        data = parser["data"]
        train = parser["train"] if parser.has_section("train") else parser["DEFAULT"]
        cap = parser["capacity"] if parser.has_section("capacity") else parser["DEFAULT"]
        bl = parser["baselines"] if parser.has_section("baselines") else parser["DEFAULT"]
        run = parser["run"] if parser.has_section("run") else parser["DEFAULT"]

        seed = train.getint("seed", 0)
        common = dict(
            epochs=train.getint("epochs", 200),
            batch_size=train.getint("batch_size", 64),
            seed=seed,
            init_scale=train.getfloat("init_scale", 1.0),
        )
        probe = TrainConfig(learning_rate=train.getfloat("probe_learning_rate", 0.1), **common)
        mlp = TrainConfig(learning_rate=train.getfloat("mlp_learning_rate", 0.05), **common)
        epochs = common["epochs"]
        feature_list = tuple(_split_list(data["features"])) if "features" in data else DEFAULT_FEATURES
        if data.get("source", "adult") == "xor" and "features" not in data:
            feature_list = ("x1", "x2", "shortcut")

        cfg = ExperimentConfig(
            source=data.get("source", "adult"),
            path=rel(data.get("path")),
            test_path=rel(data.get("test_path")),
            schema=_schema(parser),
            feature_list=feature_list,
            has_header=parser.getboolean("schema", "header", fallback=False),
            train_fraction=data.getfloat("train_fraction", 0.8),
            split_seed=data.getint("split_seed", 0),
            xor_n=data.getint("n", 2000),
            xor_leak_rate=data.getfloat("leak_rate", 1.0),
            xor_noise_std=data.getfloat("noise_std", 0.0),
            probe=probe,
            mlp=mlp,
            widths=tuple(int(w) for w in _split_list(cap.get("widths", ""))) or DEFAULT_WIDTHS,
            seeds_per_point=cap.getint("seeds_per_point", 3),
            aggregation=cap.get("aggregation", "mean"),
            delta=cap.getfloat("delta", 0.01),
            final_width=cap.getint("final_width", 32),
            n_jobs=cap.getint("n_jobs", 1),
            scenarios=_scenarios(parser),
            l1_enabled=bl.getboolean("l1", True),
            l1_lambda=bl.getfloat("l1_lambda", 0.05),
            jtt_enabled=bl.getboolean("jtt", True),
            jtt=JttConfig(
                upweight_factor=bl.getint("upweight_factor", 5),
                phase1_epochs=bl.getint("phase1_epochs", epochs),
                phase2_epochs=bl.getint("phase2_epochs", epochs),
            ),
            output_dir=rel(run.get("output_dir")) or "runs/latest",
            stages=tuple(_split_list(run.get("stages", ""))) or STAGES,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
    cfg.validate()
    return cfg
