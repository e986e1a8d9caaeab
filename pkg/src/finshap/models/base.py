"""Shared probability-prediction contract for all classifier families."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, ClassVar

import numpy as np

from ..errors import ConfigError, DataError, ShapeError

FORMAT_VERSION = 1
# hybrid rows materialized at once by the generic masked evaluation
_MASKED_CHUNK_ROWS = 200_000


class ModelKind(str, Enum):
    LOGISTIC = "Logistic"
    RANDOM_FOREST = "RandomForest"
    GBT = "GradientBoostedTrees"
    SVM_RBF = "SvmRbf"


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ShapeError(f"X must be a matrix, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] == 0:
        raise DataError("cannot train on zero rows")
    if not np.isfinite(X).all():
        raise DataError("X contains non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise DataError("y must be 0/1")
    return np.ascontiguousarray(X), y.astype(np.float64)


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    SIGMA_FLOOR: ClassVar[float] = 1e-9

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        return cls(X.mean(axis=0), np.maximum(X.std(axis=0), cls.SIGMA_FLOOR))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))


@dataclass(frozen=True)
class Hyper:
    """Base for per-family hyperparameter records."""

    @classmethod
    def from_dict(cls, d: dict | None) -> "Hyper":
        d = dict(d or {})
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown {cls.__name__} settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class TrainedModel:
    """A fitted binary classifier; immutable once trained."""

    kind: ClassVar[ModelKind]
    _registry: ClassVar[dict[ModelKind, type["TrainedModel"]]] = {}

    feature_count: int
    training_meta: dict

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if "kind" in cls.__dict__:
            TrainedModel._registry[cls.kind] = cls

    def predict_proba(self, X) -> np.ndarray:
        """Class-1 probability for every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_count:
            raise ShapeError(f"expected {self.feature_count} columns, got shape {X.shape}")
        if X.shape[0] == 0:
            return np.zeros(0)
        return self._proba(np.ascontiguousarray(X))

    def _proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def masked_proba(self, masks: np.ndarray, x: np.ndarray, background: np.ndarray) -> np.ndarray:
        """Class-1 probabilities of all hybrids, shape ``(n_masks, n_background)``.

        Hybrid ``(s, b)`` takes ``x`` on ``masks[s]`` and ``background[b]``
        elsewhere. Subclasses with a fused kernel override this.
        """
        S, B = masks.shape[0], background.shape[0]
        out = np.empty((S, B))
        step = max(1, _MASKED_CHUNK_ROWS // max(B, 1))
        for lo in range(0, S, step):
            m = masks[lo : lo + step]
            hybrid = np.where(m[:, None, :], x[None, None, :], background[None, :, :])
            out[lo : lo + step] = self._proba(hybrid.reshape(-1, self.feature_count)).reshape(len(m), B)
        return out

    def _params(self) -> dict[str, Any]:
        raise NotImplementedError

    @classmethod
    def _from_params(cls, params: dict, feature_count: int, meta: dict) -> "TrainedModel":
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind.value,
            "feature_count": self.feature_count,
            "training_meta": self.training_meta,
            "parameters": self._params(),
        }

    @staticmethod
    def from_dict(d: dict) -> "TrainedModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise DataError(f"unsupported model format version {d.get('format_version')!r}")
        cls = TrainedModel._registry[ModelKind(d["kind"])]
        return cls._from_params(d["parameters"], int(d["feature_count"]), d.get("training_meta", {}))


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    return model.predict_proba(X)


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
