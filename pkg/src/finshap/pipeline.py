"""Dataset-wide explanation, Top-k frequency rankings and feature-subset validation."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import GROUP_ORDER, FeatureSchema, Group, LabeledDataset
from .errors import ConfigError, ShapeError
from .game import (
    Partition,
    exact_shapley,
    kernel_shap,
    masking_games,
    partition_shapley,
    sampled_shapley,
)
from .metrics import evaluate
from .models import ModelKind, parse_hyper, train_model
from .seeding import derive_seed

METHODS = ("exact", "permutation", "kernel", "partition")
SCOPES = (0, 1, "both")
DIRECTIONS = ("Highest", "Lowest")


def default_budgets(M: int) -> dict:
    return {"n_coalitions": 2 * M + 2048, "n_permutations": 2000, "regularization": 1e-10}


def schema_partition(schema: FeatureSchema) -> tuple[Partition, list[str]]:
    """Partition of feature positions into the schema's groups (in group order)."""
    pos = schema.group_positions()
    groups = [g for g in GROUP_ORDER if g in pos and len(pos[g])]
    return Partition.from_lists(len(schema), [pos[g].tolist() for g in groups]), [g.value for g in groups]


@dataclass(frozen=True, eq=False)
class AttributionMatrix:
    """Per-instance, per-player, per-class attributions: ``values[i, j, c]``."""

    values: np.ndarray
    method: str
    budgets: dict
    seed: int
    instance_ids: list[str]
    player_names: list[str]
    evaluations: np.ndarray  # (n_instances, 2)
    baseline: str = "mean"

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[2] != 2:
            raise ShapeError(f"attributions must be (n, M, 2), got {self.values.shape}")
        n, M, _ = self.values.shape
        if len(self.instance_ids) != n or len(self.player_names) != M:
            raise ShapeError("instance ids or player names disagree with the attribution shape")

    @property
    def n_instances(self) -> int:
        return self.values.shape[0]

    @property
    def n_players(self) -> int:
        return self.values.shape[1]

    def meta(self) -> dict:
        return {
            "method": self.method,
            "budgets": self.budgets,
            "seed": self.seed,
            "baseline": self.baseline,
            "instance_ids": list(self.instance_ids),
            "player_names": list(self.player_names),
            "evaluations": self.evaluations.tolist(),
        }

    def save(self, csv_path: str | Path, meta_path: str | Path) -> None:
        """Long-format CSV (one row per instance and class) plus a JSON sidecar."""
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["instance_id", "class", *self.player_names])
            for i, inst in enumerate(self.instance_ids):
                for c in (0, 1):
                    w.writerow([inst, c, *(repr(float(v)) for v in self.values[i, :, c])])
        write_json(meta_path, self.meta())

    @classmethod
    def load(cls, csv_path: str | Path, meta_path: str | Path) -> "AttributionMatrix":
        meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
        n, M = len(meta["instance_ids"]), len(meta["player_names"])
        values = np.zeros((n, M, 2))
        with open(csv_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        for r, row in enumerate(rows):
            values[r // 2, :, int(row[1])] = [float(v) for v in row[2:]]
        return cls(
            values,
            meta["method"],
            meta["budgets"],
            meta["seed"],
            meta["instance_ids"],
            meta["player_names"],
            np.asarray(meta["evaluations"], dtype=np.int64).reshape(n, 2),
            meta.get("baseline", "mean"),
        )


def _explain_one(model, x, background, method, budgets, seed, partition, baseline):
    games = masking_games(model, x, background, seed=seed, baseline=baseline)
    phis, evals = [], []
    for game in games:
        # both classes share the seed, so sampled designs match and class 0 mirrors class 1
        if method == "exact":
            res = exact_shapley(game)
        elif method == "permutation":
            res = sampled_shapley(game, int(budgets["n_permutations"]), seed)
        elif method == "kernel":
            res = kernel_shap(game, budgets["n_coalitions"], seed, float(budgets.get("regularization", 1e-10)))
        else:
            res = partition_shapley(game, partition)
        phis.append(res.phi)
        evals.append(res.evaluations_used)
    return np.stack(phis, axis=1), evals


def explain_dataset(
    model,
    test: LabeledDataset,
    background: np.ndarray,
    method: str = "kernel",
    budgets: dict | None = None,
    seed: int = 0,
    workers: int = 1,
    baseline: str = "mean",
    partition: Partition | None = None,
) -> AttributionMatrix:
    """Attribute every test instance for both classes.

    Instance ``i`` uses the sub-seed ``derive_seed(seed, "instance", i)``,
    so results do not depend on ``workers``. ``method="partition"`` uses
    the schema's groups unless ``partition`` is given.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown attribution method {method!r}; choose from {METHODS}")
    M = test.X.shape[1]
    if M != model.feature_count:
        raise ShapeError(f"model expects {model.feature_count} features, test set has {M}")
    budgets = {**default_budgets(M), **(budgets or {})}
    if method == "partition":
        if partition is None:
            partition, names = schema_partition(test.schema)
        else:
            names = [f"group_{g}" for g in range(len(partition))]
    else:
        names = list(test.schema.names)
    seeds = [derive_seed(seed, "instance", i) for i in range(len(test))]

    def run(i):
        return _explain_one(model, test.X[i], background, method, budgets, seeds[i], partition, baseline)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(test))))
    else:
        results = [run(i) for i in range(len(test))]
    values = np.zeros((len(test), len(names), 2))
    evals = np.zeros((len(test), 2), dtype=np.int64)
    for i, (phi, ev) in enumerate(results):
        values[i] = phi
        evals[i] = ev
    ids = [f"{c}:{int(y)}" for c, y in zip(test.company_ids.tolist(), test.years.tolist())]
    return AttributionMatrix(values, method, budgets, seed, ids, names, evals, baseline)


def _scope_scores(attr: AttributionMatrix, class_scope, absolute: bool) -> np.ndarray:
    v = np.abs(attr.values) if absolute else attr.values
    if class_scope == "both":
        return v.max(axis=2)
    if class_scope in (0, 1):
        return v[:, :, class_scope]
    raise ConfigError(f"class_scope must be 0, 1 or 'both', got {class_scope!r}")


@dataclass(frozen=True, eq=False)
class RankingReport:
    counts: np.ndarray
    k: int
    class_scope: object
    direction: str
    n_instances: int
    player_names: list[str]
    absolute: bool = False
    order: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        # count descending, then position ascending
        object.__setattr__(self, "order", np.lexsort((np.arange(len(counts)), -counts)))

    def top(self, n: int) -> list[int]:
        return self.order[:n].tolist()

    def bottom(self, m: int) -> list[int]:
        return self.order[len(self.order) - m :].tolist() if m else []

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "class_scope": self.class_scope,
            "direction": self.direction,
            "absolute": self.absolute,
            "n_instances": self.n_instances,
            "ranking": [
                {"rank": r + 1, "position": int(p), "feature": self.player_names[p], "count": int(self.counts[p])}
                for r, p in enumerate(self.order)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankingReport":
        entries = sorted(d["ranking"], key=lambda e: e["position"])
        return cls(
            np.array([e["count"] for e in entries], dtype=np.int64),
            int(d["k"]),
            d["class_scope"],
            d["direction"],
            int(d["n_instances"]),
            [e["feature"] for e in entries],
            bool(d.get("absolute", False)),
        )


def topk_counts(scores: np.ndarray, k: int, direction: str) -> np.ndarray:
    """Per-player count of appearances among each row's ``k`` extreme scores."""
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    n, M = scores.shape
    if not 0 <= k <= M:
        raise ConfigError(f"k must lie in 0..{M}, got {k}")
    key = -scores if direction == "Highest" else scores
    # stable sort keeps lower positions first among ties
    picks = np.argsort(key, axis=1, kind="stable")[:, :k]
    return np.bincount(picks.ravel(), minlength=M)


def rank_by_topk_frequency(
    attr: AttributionMatrix, k: int, class_scope=1, direction: str = "Highest", absolute: bool = False
) -> RankingReport:
    """Count how often each player lands in an instance's Top-k (or Worst-k) list.

    Under ``class_scope="both"`` an instance scores each player by the
    larger of its two class attributions.
    """
    scores = _scope_scores(attr, class_scope, absolute)
    counts = topk_counts(scores, k, direction)
    return RankingReport(counts, k, class_scope, direction, attr.n_instances, list(attr.player_names), absolute)


def per_class_ranking(attr: AttributionMatrix, k: int, class_id: int, direction: str = "Highest", absolute: bool = False) -> RankingReport:
    if class_id not in (0, 1):
        raise ConfigError(f"class_id must be 0 or 1, got {class_id!r}")
    return rank_by_topk_frequency(attr, k, class_id, direction, absolute)


def group_frequency_histogram(
    attr: AttributionMatrix, schema: FeatureSchema, k: int = 10, class_scope="both", absolute: bool = False
) -> dict[str, float]:
    """Top-k appearances per schema group, divided by group size times instance count."""
    if len(schema) != attr.n_players:
        raise ShapeError(f"schema has {len(schema)} features, attributions have {attr.n_players}")
    counts = rank_by_topk_frequency(attr, k, class_scope, "Highest", absolute).counts
    out = {}
    for g, pos in schema.group_positions().items():
        if len(pos):
            out[g.value] = float(counts[pos].sum()) / (len(pos) * max(attr.n_instances, 1))
    return out


@dataclass(frozen=True, eq=False)
class PositionalDistribution:
    bin_start: np.ndarray
    bin_stop: np.ndarray
    top: np.ndarray
    worst: np.ndarray
    n_top: int
    n_worst: int

    def to_csv(self, path: str | Path, schema: FeatureSchema | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["bin", "first_position", "last_position", f"top{self.n_top}_count", f"worst{self.n_worst}_count"]
            if schema is not None:
                header.insert(3, "group")
            w.writerow(header)
            for b in range(len(self.top)):
                row = [b, int(self.bin_start[b]), int(self.bin_stop[b]) - 1, int(self.top[b]), int(self.worst[b])]
                if schema is not None:
                    row.insert(3, schema.features[int(self.bin_start[b])].group.value)
                w.writerow(row)


def positional_distribution(
    attr: AttributionMatrix,
    schema: FeatureSchema,
    n_top: int = 50,
    n_worst: int = 50,
    n_bins: int | None = None,
    class_scope="both",
    absolute: bool = False,
) -> PositionalDistribution:
    """Top-n and Worst-n appearance counts binned along feature position."""
    M = attr.n_players
    if len(schema) != M:
        raise ShapeError(f"schema has {len(schema)} features, attributions have {M}")
    n_bins = M if n_bins is None else n_bins
    if not 1 <= n_bins <= M:
        raise ConfigError(f"n_bins must lie in 1..{M}")
    top = rank_by_topk_frequency(attr, n_top, class_scope, "Highest", absolute).counts
    worst = rank_by_topk_frequency(attr, n_worst, class_scope, "Lowest", absolute).counts
    bins = np.arange(M) * n_bins // M
    start = np.array([np.flatnonzero(bins == b)[0] for b in range(n_bins)])
    stop = np.append(start[1:], M)
    return PositionalDistribution(
        start, stop, np.bincount(bins, top, n_bins).astype(np.int64), np.bincount(bins, worst, n_bins).astype(np.int64), n_top, n_worst
    )


@dataclass(frozen=True, eq=False)
class SubsetValidationReport:
    model_kind: str
    hyper: dict
    seed: int
    keep_top_n: int
    drop_bottom_m: int
    subsets: dict[str, list[int]]
    feature_names: dict[str, list[str]]
    accuracy: dict[str, float]
    roc_auc: dict[str, float | None]
    ranking: dict

    def sizes(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.subsets.items()}

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "hyper": self.hyper,
            "seed": self.seed,
            "keep_top_n": self.keep_top_n,
            "drop_bottom_m": self.drop_bottom_m,
            "ranking": self.ranking,
            "sizes": self.sizes(),
            "accuracy": self.accuracy,
            "roc_auc": self.roc_auc,
            "subsets": self.subsets,
            "features": self.feature_names,
        }


def validation_subsets(ranking: RankingReport, keep_top_n: int, drop_bottom_m: int) -> dict[str, list[int]]:
    M = len(ranking.counts)
    if not 1 <= keep_top_n <= M:
        raise ConfigError(f"keep_top_n must lie in 1..{M}, got {keep_top_n}")
    if not 0 <= drop_bottom_m < M:
        raise ConfigError(f"drop_bottom_m must lie in 0..{M - 1}, got {drop_bottom_m}")
    dropped = set(ranking.bottom(drop_bottom_m))
    return {
        "all": list(range(M)),
        "top": sorted(ranking.top(keep_top_n)),
        "all_minus_bottom": [p for p in range(M) if p not in dropped],
    }


def seeded_hyper(kind, hyper, seed):
    h = parse_hyper(kind, hyper)
    if any(f.name == "seed" for f in dataclasses.fields(h)):
        h = dataclasses.replace(h, seed=seed)
    return h


def subset_validation(
    train: LabeledDataset,
    test: LabeledDataset,
    ranking: RankingReport,
    keep_top_n: int,
    drop_bottom_m: int,
    model_kind: ModelKind | str = ModelKind.GBT,
    hyper: dict | None = None,
    seed: int = 0,
    workers: int = 1,
    cache: dict | None = None,
) -> SubsetValidationReport:
    """Retrain on all features, on the Top-n, and on all but the bottom-m; compare test accuracy.

    The bottom-m are the players least often in the ranking's lists.
    Every run shares the same hyperparameters and seed. ``cache`` may be
    shared across calls on the same data to skip refitting a subset that
    was already evaluated.
    """
    if len(ranking.counts) != train.X.shape[1]:
        raise ShapeError("ranking and dataset disagree on the feature count")
    subsets = validation_subsets(ranking, keep_top_n, drop_bottom_m)
    kind = ModelKind(model_kind)
    h = seeded_hyper(kind, hyper, seed)
    acc, auc = {}, {}
    cache = {} if cache is None else cache
    for name, cols in subsets.items():
        key = (kind.value, json.dumps(h.to_dict(), sort_keys=True), tuple(cols))
        if key not in cache:
            model = train_model(kind, train.X[:, cols], train.y, h, workers=workers)
            cache[key] = evaluate(test.y, model.predict_proba(test.X[:, cols]))
        acc[name] = cache[key].accuracy
        auc[name] = cache[key].roc_auc
    names = train.schema.names
    return SubsetValidationReport(
        kind.value,
        h.to_dict(),
        seed,
        keep_top_n,
        drop_bottom_m,
        subsets,
        {k: [names[p] for p in v] for k, v in subsets.items()},
        acc,
        auc,
        {"k": ranking.k, "class_scope": ranking.class_scope, "direction": ranking.direction, "absolute": ranking.absolute},
    )


def _json_clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _json_clean(obj.item())
    if isinstance(obj, Group):
        return obj.value
    return obj


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(_json_clean(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_group_histogram_csv(path: str | Path, hist: dict[str, float], schema: FeatureSchema) -> None:
    sizes = {g.value: len(p) for g, p in schema.group_positions().items()}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "n_features", "normalized_frequency"])
        for g, v in hist.items():
            w.writerow([g, sizes[g], repr(float(v))])


__all__ = [
    "AttributionMatrix",
    "DIRECTIONS",
    "METHODS",
    "PositionalDistribution",
    "RankingReport",
    "SCOPES",
    "SubsetValidationReport",
    "default_budgets",
    "explain_dataset",
    "group_frequency_histogram",
    "per_class_ranking",
    "positional_distribution",
    "rank_by_topk_frequency",
    "schema_partition",
    "seeded_hyper",
    "subset_validation",
    "topk_counts",
    "validation_subsets",
    "write_group_histogram_csv",
    "write_json",
]
