"""k-means codebooks over chew descriptors, AIC model selection, BoW/VLAD."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels

N_RESTARTS = 10
MAX_ITER = 100
SSE_TOL = 1e-6
DEFAULT_K_MAX = 32


class Encoding(str, enum.Enum):
    BOW = "bow"
    VLAD = "vlad"


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    sse: float
    history: tuple = ()


def kmeans_pp_init(X, k, rng):
    """k-means++ seeding: first centre uniform, then D^2-weighted draws."""
    n = X.shape[0]
    centres = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centres[0] = X[first]
    d2 = np.sum((X - centres[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # fewer distinct points than k; any point is as good as another
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centres[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centres[j]) ** 2, axis=1))
    return centres


def restart_rngs(seed, n_restarts=N_RESTARTS):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_restarts)]


def kmeans(X, k, seed, n_restarts=N_RESTARTS, max_iter=MAX_ITER, tol=SSE_TOL):
    """Best-of-restarts Lloyd's algorithm with k-means++ seeding.

    Each restart draws from its own child seed, so restarts are independent
    of each other and of evaluation order.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    if k < 1 or X.shape[0] < k:
        raise ValueError(f"k-means needs N >= k >= 1 (N={X.shape[0]}, k={k})")
    best = None
    for rng in restart_rngs(seed, n_restarts):
        init = kmeans_pp_init(X, k, rng)
        C, labels, sse, hist = kernels.lloyd(X, init, max_iter, tol)
        if best is None or sse < best.sse:
            best = KMeansResult(C, labels, sse, tuple(hist))
    return best


def aic_score(sse, n, d, k):
    """AIC of a hard-assignment isotropic Gaussian mixture with shared variance."""
    var = max(sse / (n * d), np.finfo(float).tiny)
    log_lik = -(n * d / 2.0) * (np.log(2.0 * np.pi * var) + 1.0)
    return 2.0 * (k * d + 1) - 2.0 * log_lik


@dataclass(frozen=True)
class Codebook:
    centroids: np.ndarray
    seed: int = 0
    aic_curve: tuple = ()
    mode: Encoding | None = None
    meta: dict = field(default_factory=dict)

    @property
    def k(self):
        return self.centroids.shape[0]

    @property
    def d(self):
        return self.centroids.shape[1]

    def encode(self, D, mode=None):
        mode = Encoding(mode or self.mode)
        return encode_bow(self, D) if mode is Encoding.BOW else encode_vlad(self, D)

    def to_json(self):
        return {
            "k": self.k,
            "d": self.d,
            "mode": self.mode.value if self.mode else None,
            "centroids": self.centroids.tolist(),
            "seed": self.seed,
            "aic_curve": list(self.aic_curve),
        }

    @classmethod
    def from_json(cls, obj):
        C = np.asarray(obj["centroids"], dtype=np.float64).reshape(obj["k"], obj["d"])
        mode = Encoding(obj["mode"]) if obj.get("mode") else None
        return cls(C, int(obj.get("seed", 0)), tuple(obj.get("aic_curve", ())), mode)

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


def select_k_aic(X, k_max=DEFAULT_K_MAX, seed=0, mode=None):
    """Fit k = 1..min(k_max, N) and keep the AIC minimiser (ties: smaller k).

    The scan also stops at the number of distinct rows, since larger k would
    force duplicate centroids.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("AIC selection needs at least 2 descriptors")
    n_distinct = np.unique(X, axis=0).shape[0]
    k_hi = max(1, min(k_max, n, n_distinct))
    curve = []
    fits = []
    for k in range(1, k_hi + 1):
        res = kmeans(X, k, seed)
        fits.append(res)
        curve.append(aic_score(res.sse, n, d, k))
    best = int(np.argmin(curve))
    return Codebook(fits[best].centroids, seed, tuple(float(a) for a in curve), mode)


def _check_dim(cb, D):
    D = np.atleast_2d(np.asarray(D, dtype=np.float64))
    if D.shape[0] < 1:
        raise ValueError("need at least one descriptor to encode")
    if D.shape[1] != cb.d:
        raise ValueError(f"dimension mismatch: descriptors have {D.shape[1]}, codebook {cb.d}")
    return np.ascontiguousarray(D)


def encode_bow(cb, D):
    D = _check_dim(cb, D)
    labels, _ = kernels.assign(D, cb.centroids)
    return np.bincount(labels, minlength=cb.k) / D.shape[0]


def encode_vlad(cb, D):
    D = _check_dim(cb, D)
    # canonical row order makes the floating-point sums order-independent
    D = D[np.lexsort(D.T[::-1])]
    labels, _ = kernels.assign(D, cb.centroids)
    V = np.zeros_like(cb.centroids)
    np.add.at(V, labels, D - cb.centroids[labels])
    norms = np.linalg.norm(V, axis=1, keepdims=True)
    V = np.divide(V, norms, out=np.zeros_like(V), where=norms > 0)
    v = V.ravel()
    total = np.linalg.norm(v)
    return v / total if total > 0 else v
