"""Generalised regression neural network (Gaussian Nadaraya-Watson)."""
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .base import Kind, Model, as_xy, mean_abs_error, split_indices


@dataclass(frozen=True)
class GrnnConfig:
    n_sigmas: int = 20
    sigma_lo: float = 1e-2  # multiples of the median pairwise distance
    sigma_hi: float = 1e2
    train_frac: float = 0.9
    sigmas: tuple | None = None  # explicit grid overrides the relative one


def grnn_predict(Xtr, ytr, sigma, X):
    d2 = cdist(X, Xtr, "sqeuclidean")
    w = np.exp(-d2 / (2.0 * sigma * sigma))
    total = w.sum(axis=1)
    out = np.empty(X.shape[0])
    ok = total > 0
    out[ok] = (w[ok] @ ytr) / total[ok]
    # every kernel weight underflowed: fall back to the nearest exemplar
    out[~ok] = ytr[np.argmin(d2[~ok], axis=1)]
    return out


class GrnnModel(Model):
    kind = Kind.GRNN

    def __init__(self, X, y, sigma, **kw):
        X, y = as_xy(X, y)
        super().__init__(X.shape[1], **kw)
        self.X, self.y, self.sigma = X, y, float(sigma)

    def _predict(self, X):
        return grnn_predict(self.X, self.y, self.sigma, X)

    def _params_json(self):
        return {"X": self.X.tolist(), "y": self.y.tolist(), "sigma": self.sigma}

    @classmethod
    def from_json(cls, obj):
        p = obj["parameters"]
        X = np.asarray(p["X"], dtype=np.float64).reshape(len(p["y"]), obj["p"])
        return cls(X, p["y"], p["sigma"], hyper=obj["hyper"], seed=obj["seed"], val_mae=obj["val_mae"])


def sigma_grid(X, cfg):
    if cfg.sigmas is not None:
        return np.asarray(cfg.sigmas, dtype=np.float64)
    scale = float(np.median(pdist(X))) if X.shape[0] >= 2 else 1.0
    if not scale > 0:
        scale = 1.0
    return scale * np.logspace(np.log10(cfg.sigma_lo), np.log10(cfg.sigma_hi), cfg.n_sigmas)


def grnn_fit(X, y, cfg=GrnnConfig(), seed=0):
    """Pick sigma on a seeded 90/10 split, then keep all training exemplars."""
    X, y = as_xy(X, y)
    if X.shape[0] < 2:
        raise ValueError("GRNN needs at least 2 training bouts")
    grid = sigma_grid(X, cfg)
    tr, va = split_indices(X.shape[0], cfg.train_frac, seed)
    scores = [mean_abs_error(y[va], grnn_predict(X[tr], y[tr], s, X[va])) for s in grid]
    best = int(np.argmin(scores))
    return GrnnModel(X, y, grid[best], seed=seed, val_mae=float(scores[best]),
                     hyper={"sigma": float(grid[best]), "sigma_grid": grid.tolist(),
                            "val_mae_grid": [float(s) for s in scores]})
