"""Financial-ratio features computed row-wise from a raw panel.

A ratio side is a signed sum of line items. In the JSON spec file each
side is either a feature name or a list of names, where a leading ``-``
subtracts the item::

    {"name": "quick_ratio",
     "numerator": ["current_assets", "-inventories"],
     "denominator": "current_liabilities"}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ConfigError, SchemaError
from .panel import PanelDataset
from .schema import FeatureSchema, Group

ZERO_DENOMINATOR = 1e-12

Term = tuple[str, float]


@dataclass(frozen=True)
class Ratio:
    name: str
    numerator: tuple[Term, ...]
    denominator: tuple[Term, ...]

    def features(self) -> set[str]:
        return {n for n, _ in self.numerator + self.denominator}


@dataclass(frozen=True)
class RatioSpec:
    ratios: tuple[Ratio, ...]

    @classmethod
    def from_records(cls, records: list[dict]) -> "RatioSpec":
        ratios = []
        try:
            for r in records:
                ratios.append(Ratio(str(r["name"]), _parse_side(r["numerator"]), _parse_side(r["denominator"])))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed ratio record: {exc}") from exc
        names = [r.name for r in ratios]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate ratio names")
        return cls(tuple(ratios))

    @classmethod
    def load(cls, path: str | Path) -> "RatioSpec":
        try:
            return cls.from_records(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read ratio spec {path}: {exc}") from exc

    @classmethod
    def default(cls) -> "RatioSpec":
        text = resources.files("finshap").joinpath("data/default_ratios.json").read_text(encoding="utf-8")
        return cls.from_records(json.loads(text))

    def validate(self, schema: FeatureSchema) -> None:
        for r in self.ratios:
            for name in sorted(r.features()):
                if name not in schema:
                    raise SchemaError(f"ratio {r.name!r} references unknown feature {name!r}")


def _parse_side(side) -> tuple[Term, ...]:
    items = [side] if isinstance(side, str) else list(side)
    if not items:
        raise ConfigError("empty ratio side")
    terms = []
    for item in items:
        item = str(item).strip()
        if item.startswith("-"):
            terms.append((item[1:].strip(), -1.0))
        else:
            terms.append((item.lstrip("+").strip(), 1.0))
    return tuple(terms)


def _side_values(panel: PanelDataset, terms: tuple[Term, ...]) -> tuple[np.ndarray, np.ndarray]:
    total = np.zeros(len(panel))
    missing = np.zeros(len(panel), dtype=bool)
    for name, sign in terms:
        vals, miss = panel.column(name)
        total = total + sign * vals
        missing |= miss
    return total, missing


def compute_ratios(panel: PanelDataset, spec: RatioSpec) -> PanelDataset:
    """Panel whose only features are the ratios of ``spec``.

    A ratio whose denominator is within ``ZERO_DENOMINATOR`` of zero is set
    to 0 and flagged missing; so is any ratio built from an empty cell.
    """
    spec.validate(panel.schema)
    n, R = len(panel), len(spec.ratios)
    values = np.zeros((n, R))
    missing = np.zeros((n, R), dtype=bool)
    for k, ratio in enumerate(spec.ratios):
        num, num_miss = _side_values(panel, ratio.numerator)
        den, den_miss = _side_values(panel, ratio.denominator)
        guard = np.abs(den) < ZERO_DENOMINATOR
        values[:, k] = np.where(guard, 0.0, num / np.where(guard, 1.0, den))
        missing[:, k] = guard | num_miss | den_miss
    schema = FeatureSchema.from_groups([(Group.RATIO_ANALYSIS, [r.name for r in spec.ratios])])
    return PanelDataset(panel.company_ids.copy(), panel.years.copy(), values, missing, schema)
