"""Feature catalog with financial-statement group metadata."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import SchemaError


class Group(str, Enum):
    FINANCIAL_PROFILE = "FinancialProfile"
    BALANCE_SHEET = "BalanceSheet"
    INCOME_STATEMENT = "IncomeStatement"
    RATIO_ANALYSIS = "RatioAnalysis"


GROUP_ORDER: tuple[Group, ...] = tuple(Group)


@dataclass(frozen=True)
class Feature:
    name: str
    group: Group
    position: int


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature list; groups occupy contiguous position blocks."""

    features: tuple[Feature, ...]

    def __post_init__(self):
        feats = tuple(sorted(self.features, key=lambda f: f.position))
        object.__setattr__(self, "features", feats)
        positions = [f.position for f in feats]
        if positions != list(range(len(feats))):
            raise SchemaError(f"positions must be 0..{len(feats) - 1} without gaps, got {positions[:10]}...")
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise SchemaError(f"duplicate feature name {dup!r}")
        seen: set[Group] = set()
        prev = None
        for f in feats:
            if not isinstance(f.group, Group):
                raise SchemaError(f"feature {f.name!r} has unknown group {f.group!r}")
            if f.group != prev:
                if f.group in seen:
                    raise SchemaError(f"group {f.group.value} is not contiguous (at {f.name!r})")
                seen.add(f.group)
                prev = f.group
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @classmethod
    def from_groups(cls, blocks: Iterable[tuple[Group, Sequence[str]]]) -> "FeatureSchema":
        feats = []
        for group, names in blocks:
            for name in names:
                feats.append(Feature(name, Group(group), len(feats)))
        return cls(tuple(feats))

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "FeatureSchema":
        try:
            feats = tuple(Feature(str(r["name"]), Group(r["group"]), int(r["position"])) for r in records)
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"malformed schema record: {exc}") from exc
        return cls(feats)

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        try:
            records = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
        if not isinstance(records, list):
            raise SchemaError("schema file must hold a JSON array")
        return cls.from_records(records)

    def to_records(self) -> list[dict]:
        return [{"name": f.name, "group": f.group.value, "position": f.position} for f in self.features]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_records(), indent=1) + "\n", encoding="utf-8")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def groups(self) -> list[Group]:
        return [f.group for f in self.features]

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"feature {name!r} not in schema") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def group_positions(self) -> dict[Group, np.ndarray]:
        """Positions of every non-empty group, in document order."""
        out: dict[Group, list[int]] = {}
        for f in self.features:
            out.setdefault(f.group, []).append(f.position)
        return {g: np.asarray(p, dtype=np.int64) for g, p in out.items()}

    def subset(self, positions: Iterable[int]) -> "FeatureSchema":
        """Schema over the given features, renumbered in original order."""
        keep = sorted(set(int(p) for p in positions))
        return FeatureSchema(
            tuple(Feature(self.features[p].name, self.features[p].group, i) for i, p in enumerate(keep))
        )
