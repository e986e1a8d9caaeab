"""Company-year panels, ROI-direction labels and the year split."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError, DuplicationError, EmptyDatasetError, ParseError, SchemaError, SplitError
from .schema import FeatureSchema

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Columnar company-year panel.

    ``missing[i, j]`` is True exactly when the source cell was empty; such
    cells hold 0.0 in ``values``.
    """

    company_ids: np.ndarray
    years: np.ndarray
    values: np.ndarray
    missing: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        n, F = self.values.shape
        if F != len(self.schema):
            raise SchemaError(f"panel has {F} columns, schema has {len(self.schema)}")
        if self.missing.shape != (n, F) or len(self.company_ids) != n or len(self.years) != n:
            raise SchemaError("panel arrays disagree on row count")
        _check_unique_keys(self.company_ids, self.years)

    def __len__(self) -> int:
        return len(self.years)

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        j = self.schema.index_of(name)
        return self.values[:, j], self.missing[:, j]

    def take(self, rows: np.ndarray) -> "PanelDataset":
        return PanelDataset(
            self.company_ids[rows], self.years[rows], self.values[rows], self.missing[rows], self.schema
        )


def _check_unique_keys(company_ids, years) -> None:
    seen = set()
    for i, key in enumerate(zip(company_ids.tolist(), years.tolist())):
        if key in seen:
            raise DuplicationError(f"duplicate (company_id, year) {key} at row {i + 1}")
        seen.add(key)


def load_panel(csv_path: str | Path, schema_path: str | Path) -> PanelDataset:
    """Read a panel CSV whose header is ``company_id,year,<schema names>``."""
    schema = FeatureSchema.load(schema_path)
    expected = ["company_id", "year", *schema.names]
    companies, years, rows, masks = [], [], [], []
    try:
        fh = open(csv_path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read panel file {csv_path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{csv_path} is empty") from None
        for k in range(max(len(header), len(expected))):
            got = header[k] if k < len(header) else None
            want = expected[k] if k < len(expected) else None
            if got != want:
                raise SchemaError(
                    f"header mismatch at column {k + 1}: found {got!r}, schema expects {want!r}"
                )
        width = len(expected)
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != width:
                raise ParseError(f"row {r}: expected {width} cells, found {len(record)}")
            companies.append(record[0])
            try:
                years.append(int(record[1]))
            except ValueError:
                raise ParseError(f"row {r}, column 'year': not an integer: {record[1]!r}") from None
            vals = np.zeros(width - 2)
            miss = np.zeros(width - 2, dtype=bool)
            for j, cell in enumerate(record[2:]):
                if cell.strip() == "":
                    miss[j] = True
                    continue
                try:
                    vals[j] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"row {r}, column {schema.names[j]!r}: not a number: {cell!r}"
                    ) from None
            rows.append(vals)
            masks.append(miss)
    F = len(schema)
    return PanelDataset(
        np.asarray(companies, dtype=object),
        np.asarray(years, dtype=np.int64),
        np.vstack(rows) if rows else np.zeros((0, F)),
        np.vstack(masks) if masks else np.zeros((0, F), dtype=bool),
        schema,
    )


def write_panel(panel: PanelDataset, csv_path: str | Path) -> None:
    """Inverse of :func:`load_panel`; values round-trip exactly via ``repr``."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["company_id", "year", *panel.schema.names])
        for i in range(len(panel)):
            cells = [
                "" if m else repr(float(v)) for v, m in zip(panel.values[i].tolist(), panel.missing[i].tolist())
            ]
            w.writerow([panel.company_ids[i], int(panel.years[i]), *cells])


@dataclass(frozen=True)
class LabelDiagnostics:
    n_pairs: int
    n_dropped_missing: int
    n_ties: int


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    years: np.ndarray
    company_ids: np.ndarray
    schema: FeatureSchema
    diagnostics: LabelDiagnostics | None = None

    def __post_init__(self):
        n = self.X.shape[0]
        if not (len(self.y) == n == len(self.years) == len(self.company_ids)):
            raise SchemaError("labeled dataset arrays disagree on row count")
        if self.X.shape[1] != len(self.schema):
            raise SchemaError("feature matrix width differs from schema size")
        if n and not np.isin(self.y, (0, 1)).all():
            raise SchemaError("labels must be 0/1")

    def __len__(self) -> int:
        return len(self.y)

    def take(self, rows) -> "LabeledDataset":
        return LabeledDataset(self.X[rows], self.y[rows], self.years[rows], self.company_ids[rows], self.schema)

    def select_features(self, positions) -> "LabeledDataset":
        keep = sorted(set(int(p) for p in positions))
        return LabeledDataset(
            self.X[:, keep], self.y, self.years, self.company_ids, self.schema.subset(keep), self.diagnostics
        )


def build_labels(
    panel: PanelDataset, roi_feature: str, feature_panel: PanelDataset | None = None
) -> LabeledDataset:
    """One row per company and consecutive year pair (t, t+1).

    Features come from year t (of ``feature_panel`` when given, matched on
    company and year); the label is 1 when ROI rises from t to t+1.
    Unchanged ROI is labeled 0 and counted as a tie. Pairs where either
    ROI cell was empty are dropped and counted.
    """
    if roi_feature not in panel.schema:
        raise SchemaError(f"ROI feature {roi_feature!r} not in schema")
    if len(panel) == 0:
        raise EmptyDatasetError("panel has no rows")
    roi, roi_missing = panel.column(roi_feature)
    index = {(c, int(y)): i for i, (c, y) in enumerate(zip(panel.company_ids.tolist(), panel.years.tolist()))}
    source = panel if feature_panel is None else feature_panel
    if feature_panel is not None:
        src_index = {
            (c, int(y)): i for i, (c, y) in enumerate(zip(source.company_ids.tolist(), source.years.tolist()))
        }
    rows, labels, n_pairs, n_dropped, n_ties = [], [], 0, 0, 0
    for i, (c, t) in enumerate(zip(panel.company_ids.tolist(), panel.years.tolist())):
        j = index.get((c, t + 1))
        if j is None:
            continue
        n_pairs += 1
        if roi_missing[i] or roi_missing[j]:
            n_dropped += 1
            continue
        if feature_panel is not None:
            k = src_index.get((c, t))
            if k is None:
                n_dropped += 1
                continue
        else:
            k = i
        if roi[j] == roi[i]:
            n_ties += 1
        rows.append(k)
        labels.append(1 if roi[j] > roi[i] else 0)
    if not rows:
        raise EmptyDatasetError(f"no labelable rows ({n_pairs} year pairs, {n_dropped} dropped)")
    rows = np.asarray(rows, dtype=np.int64)
    if n_dropped:
        log.info("dropped %d year pairs with missing ROI", n_dropped)
    return LabeledDataset(
        source.values[rows].copy(),
        np.asarray(labels, dtype=np.int8),
        source.years[rows].copy(),
        source.company_ids[rows].copy(),
        source.schema,
        LabelDiagnostics(n_pairs, n_dropped, n_ties),
    )


class YearSplit(NamedTuple):
    train: LabeledDataset
    test: LabeledDataset
    n_discarded: int


def split_by_year(ds: LabeledDataset, train_last_year: int, test_year: int) -> YearSplit:
    if test_year <= train_last_year:
        raise ConfigError(f"test_year ({test_year}) must come after train_last_year ({train_last_year})")
    train_rows = ds.years <= train_last_year
    test_rows = ds.years == test_year
    hist = dict(sorted(Counter(ds.years.tolist()).items()))
    if not train_rows.any():
        raise SplitError(f"empty train partition (years <= {train_last_year}); year histogram {hist}")
    if not test_rows.any():
        raise SplitError(f"empty test partition (year == {test_year}); year histogram {hist}")
    discarded = int(len(ds) - train_rows.sum() - test_rows.sum())
    return YearSplit(ds.take(np.flatnonzero(train_rows)), ds.take(np.flatnonzero(test_rows)), discarded)
