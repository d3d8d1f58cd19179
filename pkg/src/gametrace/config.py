"""Run configuration: one structured file, flag overrides, and a fingerprint.

Defaults are the production protocol: KNN k=5 on 10 folds, forest of 100
trees at seed 42 and MLP (one hidden layer of 128, 100 epochs, Adam at
0.001) on 5 folds each, 80-20 holdout split. The fingerprint is a SHA-256
over the canonical JSON of everything that can change results; filesystem
paths and worker counts are excluded so reruns elsewhere compare equal.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .aggregation import DEFAULT_SPECS, AggregatorSpec, validate_specs
from .dataset import DEFAULT_QUESTION_GROUPS
from .errors import ConfigError
from .selection import DEFAULT_MANDATORY_DROPS
from .synth import DEFAULT_BIAS, DEFAULT_NOISE, DEFAULT_NULL_RATES, DEFAULT_WEIGHTS


@dataclass
class KnnSettings:
    k: int = 5
    metric: str = "euclidean"
    folds: int = 10
    scale: bool = True


@dataclass
class MlpSettings:
    hidden_sizes: tuple[int, ...] = (128,)
    output_dim: int = 2
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 256
    hidden_activation: str = "logistic"
    folds: int = 5
    scale: bool = True


@dataclass
class ForestSettings:
    trees: int = 100
    criterion: str = "gini"
    feature_subsample: str = "sqrt"
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    folds: int = 5
    scale: bool = False


@dataclass
class SplitSettings:
    test_fraction: float = 0.2
    grouping: str = "by_session"


@dataclass
class SelectionSettings:
    k: int = 11
    redundancy_threshold: float = 0.9
    mandatory_drops: tuple[str, ...] = DEFAULT_MANDATORY_DROPS
    mi_bins: int = 10
    mi_unit: str = "nats"


@dataclass
class SynthSettings:
    sessions: int = 120
    events_per_session: int = 1000
    noise: float = DEFAULT_NOISE
    bias: float = DEFAULT_BIAS
    weights: tuple[float, ...] = DEFAULT_WEIGHTS
    null_rates: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_NULL_RATES))


@dataclass
class RunConfig:
    # paths: resolved at run time, never fingerprinted
    workdir: str = "."
    events_path: str = ""
    labels_path: str = ""
    workers: int = 0  # 0 = all available cores; recorded in run metadata

    seed: int = 42
    protocol: str = "cv"  # or "holdout"
    question_groups: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_QUESTION_GROUPS))
    aggregator_specs: tuple[AggregatorSpec, ...] = DEFAULT_SPECS
    split: SplitSettings = field(default_factory=SplitSettings)
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    knn: KnnSettings = field(default_factory=KnnSettings)
    mlp: MlpSettings = field(default_factory=MlpSettings)
    forest: ForestSettings = field(default_factory=ForestSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)

    def fingerprint_payload(self) -> dict:
        """Everything that can change computed results, canonically keyed."""
        return {
            "seed": self.seed,
            "protocol": self.protocol,
            "question_groups": {str(k): v for k, v in sorted(self.question_groups.items())},
            "aggregator_specs": [
                {"column": s.column, "kind": s.kind, "output_name": s.output_name}
                for s in self.aggregator_specs
            ],
            "split": asdict(self.split),
            "selection": {**asdict(self.selection), "mandatory_drops": list(self.selection.mandatory_drops)},
            "knn": asdict(self.knn),
            "mlp": {**asdict(self.mlp), "hidden_sizes": list(self.mlp.hidden_sizes)},
            "forest": asdict(self.forest),
            "synth": {**asdict(self.synth), "weights": list(self.synth.weights)},
        }

    def fingerprint(self) -> str:
        canon = json.dumps(self.fingerprint_payload(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _apply_section(obj, data: dict, section: str):
    known = {f.name for f in fields(obj)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in config section {section!r}")
        current = getattr(obj, key)
        if isinstance(current, tuple) and isinstance(value, list):
            value = tuple(value)
        setattr(obj, key, value)
    return obj


def load_config(path: Optional[Path] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Build a RunConfig from defaults, then a file, then explicit overrides."""
    cfg = RunConfig()
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if overrides:
        data = _merge(data, overrides)

    sections = {
        "split": cfg.split,
        "selection": cfg.selection,
        "knn": cfg.knn,
        "mlp": cfg.mlp,
        "forest": cfg.forest,
        "synth": cfg.synth,
    }
    top_known = {f.name for f in fields(RunConfig)}
    for key, value in data.items():
        if key in sections:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            _apply_section(sections[key], value, key)
        elif key == "question_groups":
            cfg.question_groups = {int(q): g for q, g in value.items()}
        elif key == "aggregator_specs":
            cfg.aggregator_specs = validate_specs(
                AggregatorSpec(s["column"], s["kind"], s.get("output_name", "")) for s in value
            )
        elif key in top_known:
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown top-level config key {key!r}")
    return cfg


def _merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out
