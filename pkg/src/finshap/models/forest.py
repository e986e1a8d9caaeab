"""Bagged CART forest with Gini splits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..seeding import derive_seed
from .base import Hyper, ModelKind, TrainedModel, check_training_data
from .trees import TreeArrays, ensemble_sum, ensemble_sum_masked, grow_gini_tree


@dataclass(frozen=True)
class ForestHyper(Hyper):
    n_trees: int = 300
    max_depth: int | None = None
    min_leaf: int = 1
    mtry: int | None = None
    bootstrap: bool = True
    seed: int = 0


class RandomForestModel(TrainedModel):
    kind = ModelKind.RANDOM_FOREST

    def __init__(self, trees: TreeArrays, feature_count: int, training_meta=None):
        self.trees = trees
        self.feature_count = feature_count
        self.training_meta = training_meta or {}

    def _args(self):
        t = self.trees
        return t.feature, t.threshold, t.left, t.right, t.value, t.roots

    def _proba(self, X):
        p = ensemble_sum(X, *self._args()) / self.trees.n_trees()
        return np.clip(p, 0.0, 1.0)

    def masked_proba(self, masks, x, background):
        masks = np.ascontiguousarray(masks, dtype=np.bool_)
        s = ensemble_sum_masked(masks, np.ascontiguousarray(x, dtype=np.float64),
                                np.ascontiguousarray(background, dtype=np.float64), *self._args())
        return np.clip(s / self.trees.n_trees(), 0.0, 1.0)

    def _params(self):
        return {"trees": self.trees.to_dict()}

    @classmethod
    def _from_params(cls, p, feature_count, meta):
        return cls(TreeArrays.from_dict(p["trees"]), feature_count, meta)


def train_random_forest(X, y, hyper: ForestHyper | dict | None = None, workers: int = 1) -> RandomForestModel:
    """Each tree draws its bootstrap rows and feature order from a seed
    derived from ``(hyper.seed, tree index)``, so ``workers`` never changes
    the result."""
    hyper = hyper if isinstance(hyper, ForestHyper) else ForestHyper.from_dict(hyper)
    X, y = check_training_data(X, y)
    n, F = X.shape
    mtry = hyper.mtry if hyper.mtry is not None else math.ceil(math.sqrt(F))
    if not 1 <= mtry <= F:
        raise ConfigError(f"mtry={mtry} must lie in [1, {F}]")
    if hyper.n_trees < 1 or hyper.min_leaf < 1:
        raise ConfigError("n_trees and min_leaf must be at least 1")
    max_depth = -1 if hyper.max_depth is None else int(hyper.max_depth)
    Xt = np.ascontiguousarray(X.T)

    def grow(t: int):
        s = derive_seed(hyper.seed, "forest-tree", t)
        if hyper.bootstrap:
            sample = np.random.default_rng(s).integers(0, n, size=n)
        else:
            sample = np.arange(n)
        return grow_gini_tree(Xt, y, sample.astype(np.int64), mtry, max_depth, hyper.min_leaf, np.uint64(s))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trees = list(pool.map(grow, range(hyper.n_trees)))
    else:
        trees = [grow(t) for t in range(hyper.n_trees)]
    meta = {"hyper": hyper.to_dict(), "mtry": mtry, "seed": hyper.seed}
    return RandomForestModel(TreeArrays.concat(trees), F, meta)
