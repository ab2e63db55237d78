"""Shared pieces of the regressors: splits, metrics, serialisation."""
from __future__ import annotations

import enum
import json

import numpy as np


class Kind(str, enum.Enum):
    LR = "LR"
    SVR = "SVR"
    FFNN = "FFNN"
    GRNN = "GRNN"


ESTIMATORS = tuple(Kind)


def as_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.size} targets")
    return X, y


def check_features(X, p):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != p:
        raise ValueError(f"dimension mismatch: model expects {p} features, got {X.shape[1]}")
    return X, single


def split_indices(n, train_frac, seed):
    """Random bite-level train/validation split; both parts non-empty."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = min(max(int(round(train_frac * n)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def mean_abs_error(y_true, y_pred):
    return float(np.mean(np.abs(np.asarray(y_pred) - np.asarray(y_true))))


def child_seed(seed, *keys):
    """Deterministic 64-bit seed for a sub-task identified by integer keys."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Model:
    """Fitted regressor.  Subclasses define ``kind`` and ``_predict``."""

    kind: Kind

    def __init__(self, p, hyper=None, seed=0, val_mae=None):
        self.p = int(p)
        self.hyper = dict(hyper or {})
        self.seed = int(seed)
        self.val_mae = val_mae

    def predict(self, X):
        X, single = check_features(X, self.p)
        out = self._predict(X)
        return float(out[0]) if single else out

    def _params_json(self):
        raise NotImplementedError

    def to_json(self):
        return {
            "kind": self.kind.value,
            "p": self.p,
            "hyper": self.hyper,
            "parameters": self._params_json(),
            "seed": self.seed,
            "val_mae": self.val_mae,
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)
