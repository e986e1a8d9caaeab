"""Classifier families behind one ``predict_proba`` contract."""

from __future__ import annotations

from .base import (
    FORMAT_VERSION,
    Hyper,
    ModelKind,
    Standardizer,
    TrainedModel,
    load_model,
    predict_proba,
    save_model,
    sigmoid,
)
from .forest import ForestHyper, RandomForestModel, train_random_forest
from .gbt import GBTHyper, GBTModel, log_loss, train_gbt
from .logistic import LogisticHyper, LogisticModel, logistic_objective, train_logistic
from .svm import SVMHyper, SVMModel, rbf_kernel, smo, train_svm_rbf

HYPER_TYPES: dict[ModelKind, type[Hyper]] = {
    ModelKind.LOGISTIC: LogisticHyper,
    ModelKind.RANDOM_FOREST: ForestHyper,
    ModelKind.GBT: GBTHyper,
    ModelKind.SVM_RBF: SVMHyper,
}


def parse_hyper(kind: ModelKind | str, hyper: Hyper | dict | None = None) -> Hyper:
    kind = ModelKind(kind)
    cls = HYPER_TYPES[kind]
    return hyper if isinstance(hyper, cls) else cls.from_dict(hyper)


def train_model(kind: ModelKind | str, X, y, hyper: Hyper | dict | None = None, workers: int = 1) -> TrainedModel:
    kind = ModelKind(kind)
    hyper = parse_hyper(kind, hyper)
    if kind is ModelKind.LOGISTIC:
        return train_logistic(X, y, hyper)
    if kind is ModelKind.RANDOM_FOREST:
        return train_random_forest(X, y, hyper, workers=workers)
    if kind is ModelKind.GBT:
        return train_gbt(X, y, hyper)
    return train_svm_rbf(X, y, hyper)


__all__ = [
    "FORMAT_VERSION", "Hyper", "ModelKind", "Standardizer", "TrainedModel",
    "load_model", "save_model", "predict_proba", "sigmoid", "parse_hyper", "train_model", "HYPER_TYPES",
    "LogisticHyper", "LogisticModel", "logistic_objective", "train_logistic",
    "ForestHyper", "RandomForestModel", "train_random_forest",
    "GBTHyper", "GBTModel", "log_loss", "train_gbt",
    "SVMHyper", "SVMModel", "rbf_kernel", "smo", "train_svm_rbf",
]
