"""Run configuration: a JSON document with one section per pipeline stage."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .dataset import SyntheticConfig
from .errors import ConfigError
from .models import ModelKind, parse_hyper
from .pipeline import METHODS, SCOPES


def _section(cls, d, where):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")
    return cls(**d)


@dataclass
class DataSection:
    source: str = "synthetic"  # "synthetic" or "csv"
    synthetic: dict = field(default_factory=dict)
    panel_csv: str | None = None
    schema: str | None = None
    ratio_spec: str | None = None  # None: the packaged default ratio set
    roi_feature: str = "roi"

    def validate(self):
        if self.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', got {self.source!r}")
        if self.source == "csv" and (not self.panel_csv or not self.schema):
            raise ConfigError("data.source 'csv' needs data.panel_csv and data.schema")
        if self.source == "synthetic":
            SyntheticConfig.from_dict(self.synthetic).validate()


@dataclass
class ModelSection:
    kind: str = ModelKind.GBT.value
    hyper: dict = field(default_factory=dict)

    def validate(self):
        try:
            kind = ModelKind(self.kind)
        except ValueError as exc:
            raise ConfigError(f"unknown model kind {self.kind!r}; choose from {[k.value for k in ModelKind]}") from exc
        parse_hyper(kind, self.hyper)


@dataclass
class SplitSection:
    train_last_year: int = 2020
    test_year: int = 2021


@dataclass
class AttributionSection:
    method: str = "kernel"
    n_coalitions: int | str | None = None  # None: 2M + 2048
    n_permutations: int = 2000
    regularization: float = 1e-10
    background_size: int = 100
    baseline: str = "mean"
    max_instances: int | None = None

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"attribution.method must be one of {METHODS}")
        if self.background_size < 1:
            raise ConfigError("attribution.background_size must be at least 1")
        if self.baseline not in ("mean", "half"):
            raise ConfigError("attribution.baseline must be 'mean' or 'half'")
        if self.max_instances is not None and self.max_instances < 1:
            raise ConfigError("attribution.max_instances must be positive")

    def budgets(self, M: int) -> dict:
        return {
            "n_coalitions": 2 * M + 2048 if self.n_coalitions is None else self.n_coalitions,
            "n_permutations": self.n_permutations,
            "regularization": self.regularization,
        }


@dataclass
class RankingSection:
    k: int = 50
    top_n: int = 100
    bottom_m: int = 100
    group_k: int = 10
    n_worst: int = 50
    n_bins: int | None = None
    class_scope: int | str = "both"
    absolute: bool = False

    def validate(self):
        if self.class_scope not in SCOPES:
            raise ConfigError(f"ranking.class_scope must be one of {SCOPES}")
        for name in ("k", "top_n", "group_k", "n_worst"):
            if getattr(self, name) < 0:
                raise ConfigError(f"ranking.{name} must be non-negative")


@dataclass
class GridSection:
    models: list = field(default_factory=lambda: [k.value for k in ModelKind])
    feature_sets: list = field(default_factory=lambda: ["raw", "ratios"])
    hyper: dict = field(default_factory=dict)  # per model kind

    def validate(self):
        for m in self.models:
            if m not in [k.value for k in ModelKind]:
                raise ConfigError(f"unknown model kind {m!r} in grid.models")
            parse_hyper(ModelKind(m), self.hyper.get(m))
        for s in self.feature_sets:
            if s not in ("raw", "ratios"):
                raise ConfigError(f"grid.feature_sets entries must be 'raw' or 'ratios', got {s!r}")


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "finshap-out"
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    split: SplitSection = field(default_factory=SplitSection)
    attribution: AttributionSection = field(default_factory=AttributionSection)
    ranking: RankingSection = field(default_factory=RankingSection)
    grid: GridSection = field(default_factory=GridSection)

    _SECTIONS = {
        "data": DataSection,
        "model": ModelSection,
        "split": SplitSection,
        "attribution": AttributionSection,
        "ranking": RankingSection,
        "grid": GridSection,
    }

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = dict(d or {})
        unknown = sorted(set(d) - {"seed", "output_dir", *cls._SECTIONS})
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {unknown}")
        try:
            kw = {name: _section(sec, d.get(name), name) for name, sec in cls._SECTIONS.items()}
            cfg = cls(seed=int(d.get("seed", 0)), output_dir=str(d.get("output_dir", "finshap-out")), **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    def validate(self) -> None:
        for name in self._SECTIONS:
            sec = getattr(self, name)
            if hasattr(sec, "validate"):
                sec.validate()

    def to_dict(self) -> dict:
        return {"seed": self.seed, "output_dir": self.output_dir, **{n: asdict(getattr(self, n)) for n in self._SECTIONS}}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
