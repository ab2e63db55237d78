"""Least-squares linear regression with bias."""
import numpy as np

from .base import Kind, Model, as_xy

RIDGE_JITTER = 1e-8


class LinearModel(Model):
    kind = Kind.LR

    def __init__(self, weights, bias, **kw):
        super().__init__(len(weights), **kw)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.bias = float(bias)

    def _predict(self, X):
        return X @ self.weights + self.bias

    def _params_json(self):
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_json(cls, obj):
        p = obj["parameters"]
        return cls(p["weights"], p["bias"], hyper=obj["hyper"], seed=obj["seed"], val_mae=obj["val_mae"])


def lr_fit(X, y, ridge=RIDGE_JITTER, seed=0):
    """Normal equations on the bias-augmented design with a tiny ridge jitter.

    The jitter keeps the system solvable for rank-deficient designs (e.g. a
    one-hot block alongside the bias column).
    """
    X, y = as_xy(X, y)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += ridge
    coef = np.linalg.solve(gram, A.T @ y)
    return LinearModel(coef[:-1], coef[-1], hyper={"ridge": ridge}, seed=seed)
