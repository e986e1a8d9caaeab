"""Second-order gradient boosting of regression trees on the log-odds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for
from .base import Hyper, ModelKind, TrainedModel, check_training_data, sigmoid
from .trees import TreeArrays, ensemble_sum, ensemble_sum_masked, grow_newton_tree

PRIOR_CLIP = 1e-6


@dataclass(frozen=True)
class GBTHyper(Hyper):
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_depth: int = 4
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if "lambda" in d:
            d["reg_lambda"] = d.pop("lambda")
        return super().from_dict(d)


def log_loss(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


class GBTModel(TrainedModel):
    kind = ModelKind.GBT

    def __init__(self, base_margin: float, trees: TreeArrays, feature_count: int, training_meta=None):
        self.base_margin = float(base_margin)
        self.trees = trees
        self.feature_count = feature_count
        self.training_meta = training_meta or {}

    def _args(self):
        t = self.trees
        return t.feature, t.threshold, t.left, t.right, t.value, t.roots

    def margin(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return self.base_margin + ensemble_sum(X, *self._args())

    def _proba(self, X):
        return sigmoid(self.margin(X))

    def masked_proba(self, masks, x, background):
        masks = np.ascontiguousarray(masks, dtype=np.bool_)
        s = ensemble_sum_masked(masks, np.ascontiguousarray(x, dtype=np.float64),
                                np.ascontiguousarray(background, dtype=np.float64), *self._args())
        return sigmoid(self.base_margin + s)

    def _params(self):
        return {"base_margin": self.base_margin, "trees": self.trees.to_dict()}

    @classmethod
    def _from_params(cls, p, feature_count, meta):
        return cls(p["base_margin"], TreeArrays.from_dict(p["trees"]), feature_count, meta)


def train_gbt(X, y, hyper: GBTHyper | dict | None = None) -> GBTModel:
    """Fit ``n_rounds`` Newton trees to the logistic loss.

    A round whose tree would raise the training log-loss has its leaf
    values halved until it does not, so the recorded loss trace is
    non-increasing.
    """
    hyper = hyper if isinstance(hyper, GBTHyper) else GBTHyper.from_dict(hyper)
    if hyper.learning_rate <= 0:
        raise ConfigError("learning_rate must be positive")
    if hyper.n_rounds < 0 or hyper.max_depth < 0 or hyper.reg_lambda < 0 or hyper.min_child_weight < 0:
        raise ConfigError(f"invalid boosting settings {hyper}")
    if not (0 < hyper.subsample <= 1 and 0 < hyper.colsample <= 1):
        raise ConfigError("subsample and colsample must lie in (0, 1]")
    X, y = check_training_data(X, y)
    n, F = X.shape
    prior = float(np.clip(y.mean(), PRIOR_CLIP, 1 - PRIOR_CLIP))
    base = float(np.log(prior / (1 - prior)))
    margin = np.full(n, base)
    loss = log_loss(y, margin)
    trace = [loss]
    Xt = np.ascontiguousarray(X.T)
    order = np.ascontiguousarray(np.argsort(Xt, axis=1, kind="mergesort"))
    rng = rng_for(hyper.seed, "gbt")
    root = np.zeros(1, dtype=np.int32)
    trees = []
    for _ in range(hyper.n_rounds):
        p = sigmoid(margin)
        g = p - y
        h = p * (1 - p)
        active = rng.random(n) < hyper.subsample if hyper.subsample < 1 else np.ones(n, dtype=np.bool_)
        if hyper.colsample < 1:
            k = max(1, int(round(hyper.colsample * F)))
            allowed = np.zeros(F, dtype=np.bool_)
            allowed[rng.choice(F, size=k, replace=False)] = True
        else:
            allowed = np.ones(F, dtype=np.bool_)
        f, thr, left, right, val = grow_newton_tree(
            Xt, order, g, h, active, allowed, hyper.max_depth,
            float(hyper.reg_lambda), float(hyper.min_child_weight), float(hyper.learning_rate),
        )
        step = ensemble_sum(X, f, thr, left, right, val, root)
        new_loss = log_loss(y, margin + step)
        halvings = 0
        while new_loss > loss and halvings < 40:
            val = val * 0.5
            step = step * 0.5
            new_loss = log_loss(y, margin + step)
            halvings += 1
        if new_loss > loss:
            val = np.zeros_like(val)
            step = np.zeros_like(step)
            new_loss = loss
        margin = margin + step
        loss = new_loss
        trace.append(loss)
        trees.append((f, thr, left, right, val))
    meta = {"hyper": hyper.to_dict(), "loss_trace": trace, "seed": hyper.seed}
    return GBTModel(base, TreeArrays.concat(trees), F, meta)
