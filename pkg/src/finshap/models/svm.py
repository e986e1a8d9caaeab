"""Soft-margin RBF support vector machine trained by SMO.

Working pairs are chosen with second-order information (maximal
violating ``i``, then the ``j`` giving the largest objective decrease),
and training stops when the maximal KKT violation drops below ``tol``.
Probabilities come from a sigmoid fitted to the training decision values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .base import Hyper, ModelKind, Standardizer, TrainedModel, check_training_data, sigmoid

TAU = 1e-12
_PREDICT_CHUNK = 4096


@dataclass(frozen=True)
class SVMHyper(Hyper):
    C: float = 1.0
    gamma: float | None = None
    tol: float = 1e-3
    max_passes: int = 100


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(d, 0.0))


@dataclass(frozen=True, eq=False)
class SMOResult:
    alpha: np.ndarray
    bias: float
    gap: float
    iterations: int
    converged: bool


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int) -> SMOResult:
    """Solve ``min 1/2 a'Qa - sum(a)``, ``0 <= a <= C``, ``y'a = 0``, with ``Q = yy' * K``.

    ``y`` is in {-1, +1}.
    """
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diag(K).copy()
    it = 0
    gap = np.inf
    while True:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        score = -y * grad
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        m_up = score[i]
        M_low = float(np.min(np.where(low, score, np.inf)))
        gap = m_up - M_low
        if gap < tol or it >= max_iter:
            break
        b = m_up - score
        cand = low & (b > 0)
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))
        # move a_i by y_i*lam and a_j by -y_j*lam, keeping y'a fixed
        lam = b[j] / a[j]
        lam = min(lam, C - alpha[i] if y[i] > 0 else alpha[i])
        lam = min(lam, alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] = min(max(alpha[i] + y[i] * lam, 0.0), C)
        alpha[j] = min(max(alpha[j] - y[j] * lam, 0.0), C)
        grad += lam * y * (K[i] - K[j])
        it += 1
    score = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(score[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = score[up].max() if up.any() else score[low].min()
        lo = score[low].min() if low.any() else hi
        bias = 0.5 * (float(hi) + float(lo))
    return SMOResult(alpha, bias, float(gap), it, bool(gap < tol))


def fit_platt(f: np.ndarray, y01: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Fit ``P(y=1|f) = 1 / (1 + exp(A f + B))`` by Newton's method on
    prior-smoothed targets."""
    n_pos = float(y01.sum())
    n_neg = float(len(y01) - n_pos)
    t = np.where(y01 > 0, (n_pos + 1) / (n_pos + 2), 1 / (n_neg + 2))
    A, B = 0.0, float(np.log((n_neg + 1) / (n_pos + 1)))

    def objective(A, B):
        z = A * f + B
        # -[t log p + (1-t) log(1-p)] with p = sigmoid(-z)
        return float(np.sum(np.logaddexp(0.0, z) - (1 - t) * z))

    val = objective(A, B)
    for _ in range(max_iter):
        p = sigmoid(-(A * f + B))
        d1 = t - p
        d2 = p * (1 - p)
        gA, gB = float(f @ d1), float(d1.sum())
        if abs(gA) < 1e-10 and abs(gB) < 1e-10:
            break
        h11 = float(f * f @ d2) + 1e-12
        h22 = float(d2.sum()) + 1e-12
        h21 = float(f @ d2)
        det = h11 * h22 - h21 * h21
        dA = -(h22 * gA - h21 * gB) / det
        dB = -(-h21 * gA + h11 * gB) / det
        step = 1.0
        while step >= 1e-10:
            cand = objective(A + step * dA, B + step * dB)
            if cand < val + 1e-4 * step * (gA * dA + gB * dB):
                break
            step *= 0.5
        if step < 1e-10:
            break
        A, B, val = A + step * dA, B + step * dB, cand
    return A, B


class SVMModel(TrainedModel):
    kind = ModelKind.SVM_RBF

    def __init__(self, support, coef, bias, gamma, platt, standardizer, feature_count, training_meta=None):
        self.support = np.asarray(support, dtype=np.float64).reshape(-1, feature_count)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.bias = float(bias)
        self.gamma = float(gamma)
        self.platt = (float(platt[0]), float(platt[1]))
        self.standardizer = standardizer
        self.feature_count = feature_count
        self.training_meta = training_meta or {}

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        out = np.empty(len(X))
        for lo in range(0, len(X), _PREDICT_CHUNK):
            out[lo : lo + _PREDICT_CHUNK] = (
                rbf_kernel(X[lo : lo + _PREDICT_CHUNK], self.support, self.gamma) @ self.coef + self.bias
            )
        return out

    def _proba(self, X):
        A, B = self.platt
        return sigmoid(-(A * self.decision_function(X) + B))

    def _params(self):
        return {
            "support": self.support.tolist(),
            "coef": self.coef.tolist(),
            "bias": self.bias,
            "gamma": self.gamma,
            "platt": list(self.platt),
            "standardizer": None if self.standardizer is None else self.standardizer.to_dict(),
        }

    @classmethod
    def _from_params(cls, p, feature_count, meta):
        std = None if p["standardizer"] is None else Standardizer.from_dict(p["standardizer"])
        return cls(p["support"], p["coef"], p["bias"], p["gamma"], p["platt"], std, feature_count, meta)


def train_svm_rbf(X, y, hyper: SVMHyper | dict | None = None) -> SVMModel:
    hyper = hyper if isinstance(hyper, SVMHyper) else SVMHyper.from_dict(hyper)
    X, y01 = check_training_data(X, y)
    n, F = X.shape
    gamma = hyper.gamma if hyper.gamma is not None else 1.0 / F
    if hyper.C <= 0 or gamma <= 0:
        raise ConfigError("C and gamma must be positive")
    if hyper.tol <= 0 or hyper.max_passes < 1:
        raise ConfigError("tol must be positive and max_passes at least 1")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    ys = np.where(y01 > 0, 1.0, -1.0)
    K = rbf_kernel(Z, Z, gamma)
    res = smo(K, ys, hyper.C, hyper.tol, hyper.max_passes * n)
    f_train = K @ (res.alpha * ys) + res.bias
    if 0 < y01.sum() < n:
        platt = fit_platt(f_train, y01)
    else:
        platt = (0.0, -50.0 if y01.sum() else 50.0)
    sv = res.alpha > 0
    meta = {
        "hyper": {**hyper.to_dict(), "gamma": gamma},
        "iterations": res.iterations,
        "kkt_gap": res.gap,
        "converged": res.converged,
        "n_support": int(sv.sum()),
        "support_indices": np.flatnonzero(sv).tolist(),
    }
    return SVMModel(Z[sv], (res.alpha * ys)[sv], res.bias, gamma, platt, std, F, meta)
