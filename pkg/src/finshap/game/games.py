"""Characteristic functions over feature-players.

Every game caches coalition values by bitset and counts each distinct
coalition it evaluates; repeated requests are free.
"""

from __future__ import annotations

import threading
from typing import Callable

import numpy as np

from ..errors import ConfigError, ShapeError
from .coalition import Coalition, Partition


def mask_keys(masks: np.ndarray) -> list[bytes]:
    return [row.tobytes() for row in np.packbits(masks, axis=1)]


class CoalitionGame:
    """Base class; subclasses implement ``_evaluate(masks) -> values``."""

    def __init__(self, n_players: int):
        if n_players < 1:
            raise ConfigError("a game needs at least one player")
        self.n_players = n_players
        self.evaluations = 0
        self._cache: dict[bytes, float] = {}
        self._lock = threading.Lock()

    def _evaluate(self, masks: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def values(self, masks) -> np.ndarray:
        masks = np.asarray(masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[1] != self.n_players:
            raise ShapeError(f"masks must have shape (n, {self.n_players}), got {masks.shape}")
        keys = mask_keys(masks)
        with self._lock:
            todo: dict[bytes, int] = {}
            for k, key in enumerate(keys):
                if key not in self._cache and key not in todo:
                    todo[key] = k
            if todo:
                rows = np.fromiter(todo.values(), dtype=np.int64, count=len(todo))
                fresh = np.asarray(self._evaluate(masks[rows]), dtype=np.float64)
                for key, val in zip(todo, fresh.tolist()):
                    self._cache[key] = val
                self.evaluations += len(todo)
            cache = self._cache
            return np.array([cache[key] for key in keys], dtype=np.float64)

    def value(self, coalition: Coalition) -> float:
        return float(self.values(coalition.to_mask()[None, :])[0])

    def empty_value(self) -> float:
        return float(self.values(np.zeros((1, self.n_players), dtype=bool))[0])

    def grand_value(self) -> float:
        return float(self.values(np.ones((1, self.n_players), dtype=bool))[0])


class FunctionGame(CoalitionGame):
    """Game defined by a Python callable.

    ``fn`` receives a :class:`Coalition` unless ``vectorized`` is set, in
    which case it receives the boolean mask matrix and returns all values.
    """

    def __init__(self, n_players: int, fn: Callable, vectorized: bool = False):
        super().__init__(n_players)
        self.fn = fn
        self.vectorized = vectorized

    def _evaluate(self, masks):
        if self.vectorized:
            return self.fn(masks)
        return [float(self.fn(Coalition.from_mask(m))) for m in masks]


class TableGame(CoalitionGame):
    """Game given by a full value table indexed by coalition bitset."""

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64)
        n = int(round(np.log2(len(table))))
        if len(table) != 1 << n:
            raise ShapeError("table length must be a power of two")
        super().__init__(n)
        self.table = table
        self._weights = 1 << np.arange(n, dtype=np.int64)

    def _evaluate(self, masks):
        return self.table[masks.astype(np.int64) @ self._weights]


class MaskedModel:
    """Mean class-1 probability of a model over background-filled hybrids.

    Shared by the two class games of one instance so each coalition is
    pushed through the model once.
    """

    def __init__(self, model, instance, background):
        instance = np.asarray(instance, dtype=np.float64)
        background = np.atleast_2d(np.asarray(background, dtype=np.float64))
        if background.shape[0] == 0:
            raise ConfigError("background must hold at least one row")
        if instance.shape != (model.feature_count,) or background.shape[1] != model.feature_count:
            raise ShapeError(
                f"model expects {model.feature_count} features; instance {instance.shape}, "
                f"background {background.shape}"
            )
        self.model = model
        self.instance = instance
        self.background = background
        self._cache: dict[bytes, float] = {}
        self._lock = threading.Lock()
        M = len(instance)
        # both ends go through the same averaging as every other coalition
        self.background_proba, self.instance_proba = self.mean_proba(np.array([[False] * M, [True] * M])).tolist()

    def mean_proba(self, masks: np.ndarray) -> np.ndarray:
        keys = mask_keys(masks)
        with self._lock:
            todo = {}
            for k, key in enumerate(keys):
                if key not in self._cache and key not in todo:
                    todo[key] = k
            if todo:
                rows = np.fromiter(todo.values(), dtype=np.int64, count=len(todo))
                p = self.model.masked_proba(masks[rows], self.instance, self.background).mean(axis=1)
                for key, val in zip(todo, p.tolist()):
                    self._cache[key] = val
            return np.array([self._cache[key] for key in keys])


BASELINES = ("mean", "half")


class MaskingGame(CoalitionGame):
    """``v(S)`` = mean over background rows of ``p_c(x_S + b_rest)`` minus a baseline.

    With the default ``"mean"`` baseline (the mean background prediction)
    ``v(empty) = 0`` exactly and ``v(N) = p_c(x) - baseline``. Every
    coalition, the two ends included, is averaged the same way, so a
    constant model gives 0 exactly. Class 0 values are the exact
    negation of class 1 values. The ``"half"``
    baseline centers at the 0.5 output of an uninformed classifier.
    """

    def __init__(self, masked: MaskedModel, target_class: int, baseline: str = "mean", seed: int | None = None):
        if target_class not in (0, 1):
            raise ConfigError(f"target_class must be 0 or 1, got {target_class!r}")
        if baseline not in BASELINES:
            raise ConfigError(f"baseline must be one of {BASELINES}")
        super().__init__(len(masked.instance))
        self.masked = masked
        self.target_class = target_class
        self.baseline_kind = baseline
        self.seed = seed
        self.baseline = masked.background_proba if baseline == "mean" else 0.5

    def _evaluate(self, masks):
        v1 = self.masked.mean_proba(masks) - self.baseline
        # p_0 = 1 - p_1 and both baselines are complementary, so v_0 = -v_1
        return v1 if self.target_class == 1 else -v1


def sample_background(X, size: int, seed: int) -> np.ndarray:
    """``size`` rows drawn uniformly without replacement (all rows if fewer)."""
    from ..seeding import rng_for

    X = np.asarray(X, dtype=np.float64)
    if size < 1:
        raise ConfigError("background size must be at least 1")
    if len(X) <= size:
        return X.copy()
    rows = np.sort(rng_for(seed, "background").choice(len(X), size=size, replace=False))
    return X[rows]


def masking_game(model, instance, background, target_class: int, seed: int = 0, baseline: str = "mean") -> MaskingGame:
    return MaskingGame(MaskedModel(model, instance, background), target_class, baseline, seed)


def masking_games(model, instance, background, seed: int = 0, baseline: str = "mean") -> tuple[MaskingGame, MaskingGame]:
    """Class-0 and class-1 games sharing one model-evaluation cache."""
    masked = MaskedModel(model, instance, background)
    return MaskingGame(masked, 0, baseline, seed), MaskingGame(masked, 1, baseline, seed)


class QuotientGame(CoalitionGame):
    """Game over groups: group coalition T is worth ``v(union of groups in T)``."""

    def __init__(self, base: CoalitionGame, partition: Partition):
        if partition.n_players != base.n_players:
            raise ShapeError("partition and game disagree on player count")
        super().__init__(len(partition))
        self.base = base
        self.partition = partition
        self._membership = partition.membership()

    def _evaluate(self, masks):
        feature_masks = (masks.astype(np.uint8) @ self._membership.astype(np.uint8)) > 0
        return self.base.values(feature_masks)
