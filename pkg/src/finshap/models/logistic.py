"""L2-regularized logistic regression fitted by damped Newton steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .base import Hyper, ModelKind, Standardizer, TrainedModel, check_training_data, sigmoid


@dataclass(frozen=True)
class LogisticHyper(Hyper):
    l2: float = 1.0
    max_iters: int = 100
    tol: float = 1e-8


def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean log-loss plus ``l2/2 * |w|^2``; ``params = [w..., bias]``.

    The intercept is not penalized. Returns the value and its gradient.
    """
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + exp(z)) - y z, stable for either sign of z
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(w @ w)
    r = (sigmoid(z) - y) / len(y)
    grad = np.empty_like(params)
    grad[:-1] = X.T @ r + l2 * w
    grad[-1] = r.sum()
    return float(loss), grad


class LogisticModel(TrainedModel):
    kind = ModelKind.LOGISTIC

    def __init__(self, weights, bias: float, standardizer: Standardizer | None = None, training_meta=None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)
        self.feature_count = len(self.weights)
        self.standardizer = standardizer
        self.training_meta = training_meta or {}

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return X @ self.weights + self.bias

    def _proba(self, X):
        return sigmoid(self.decision_function(X))

    def _params(self):
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
        }

    @classmethod
    def _from_params(cls, p, feature_count, meta):
        std = None if p["standardizer"] is None else Standardizer.from_dict(p["standardizer"])
        return cls(p["weights"], p["bias"], std, meta)


def train_logistic(X, y, hyper: LogisticHyper | dict | None = None) -> LogisticModel:
    hyper = hyper if isinstance(hyper, LogisticHyper) else LogisticHyper.from_dict(hyper)
    if hyper.l2 < 0 or hyper.max_iters < 0 or hyper.tol <= 0:
        raise ConfigError(f"invalid logistic settings {hyper}")
    X, y = check_training_data(X, y)
    std = Standardizer.fit(X)
    Z = std.transform(X)
    n, F = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])
    params = np.zeros(F + 1)
    loss, grad = logistic_objective(params, Z, y, hyper.l2)
    trace = [loss]
    reg = np.full(F + 1, hyper.l2)
    reg[-1] = 0.0
    converged = False
    for _ in range(hyper.max_iters):
        if np.linalg.norm(grad) < hyper.tol:
            converged = True
            break
        p = sigmoid(A @ params)
        H = (A.T * (p * (1 - p) / n)) @ A + np.diag(reg)
        H[np.diag_indices_from(H)] += 1e-12
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        slope = float(grad @ step)
        while True:
            cand = params - t * step
            cand_loss, cand_grad = logistic_objective(cand, Z, y, hyper.l2)
            if cand_loss <= loss - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        if cand_loss > loss:
            break
        params, loss, grad = cand, cand_loss, cand_grad
        trace.append(loss)
    else:
        converged = np.linalg.norm(grad) < hyper.tol
    meta = {"hyper": hyper.to_dict(), "loss_trace": trace, "converged": bool(converged)}
    return LogisticModel(params[:-1], params[-1], std, meta)
