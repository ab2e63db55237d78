"""Literature baseline: 50 chew-sequence statistics, feature selection, per-food LR.

Per segment (8 values): chew count, segment duration, mean/std chew duration,
mean/std inter-onset interval, chewing-time fraction, mean per-sample energy.
Segments: whole bout, first/second/third third (split by chew index), first
3 chews, first 5 chews.  Two bout-level values close the vector: total bout
duration and log of the total chew energy.
"""
from __future__ import annotations

import enum
import math

import numpy as np
from scipy import stats

from .boutfeat import interval_stats
from .dataset import chew_slice
from .estimators import lr_fit, model_from_json
from .estimators.base import Model

N_SEGMENT_FEATURES = 8
SEGMENTS = ("whole", "third_1", "third_2", "third_3", "first_3", "first_5")
N_FEATURES = N_SEGMENT_FEATURES * len(SEGMENTS) + 2
SEGMENT_FEATURE_NAMES = ("count", "duration", "dur_mean", "dur_std", "ioi_mean", "ioi_std",
                         "chew_fraction", "energy")
FEATURE_NAMES = tuple(f"{s}_{f}" for s in SEGMENTS for f in SEGMENT_FEATURE_NAMES) + (
    "bout_duration", "bout_log_energy")
SPEARMAN_TOP = 10
ENTER_P = 0.05
REMOVE_P = 0.10
MAX_STEPWISE_ITER = 50


class Selection(str, enum.Enum):
    SPEARMAN = "spearman"
    STEPWISE = "stepwise"


def segment_indices(n):
    """Chew index ranges for the six segments; empty ones fall back to all chews."""
    b1, b2 = math.ceil(n / 3), math.ceil(2 * n / 3)
    raw = [(0, n), (0, b1), (b1, b2), (b2, n), (0, min(3, n)), (0, min(5, n))]
    return [(lo, hi) if hi > lo else (0, n) for lo, hi in raw]


def _chew_energies(bout, recording):
    """(sum of squares, sample count) per chew."""
    out = []
    for chew in bout.chews:
        lo, hi = chew_slice(chew, recording.sample_rate_hz)
        x = recording.samples[lo:hi].astype(np.float64)
        out.append((float(np.dot(x, x)), x.size))
    return np.array(out, dtype=np.float64).reshape(-1, 2)


def _segment_features(starts, stops, energy):
    dur_mean, dur_std, ioi_mean, ioi_std = interval_stats(starts, stops)
    seg_dur = float(stops[-1] - starts[0])
    chewing = float(np.sum(stops - starts))
    frac = chewing / seg_dur if seg_dur > 0 else 0.0
    n_samples = energy[:, 1].sum()
    mean_energy = energy[:, 0].sum() / n_samples if n_samples > 0 else 0.0
    return [float(starts.size), seg_dur, dur_mean, dur_std, ioi_mean, ioi_std, frac, mean_energy]


def amft_features(bout, recording):
    starts, stops = bout.starts, bout.stops
    if starts.size == 0:
        raise ValueError("bout has no chews")
    energy = _chew_energies(bout, recording)
    vec = []
    for lo, hi in segment_indices(starts.size):
        vec += _segment_features(starts[lo:hi], stops[lo:hi], energy[lo:hi])
    total_energy = energy[:, 0].sum()
    vec.append(float(stops[-1] - starts[0]))
    vec.append(float(np.log(total_energy + 1e-12)))
    return np.asarray(vec, dtype=np.float64)


def spearman(x, y):
    """Pearson correlation of average-tie ranks; 0 when either rank set is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 3:
        raise ValueError("spearman needs two equal-length samples of size >= 3")
    rx = stats.rankdata(x) - (x.size + 1) / 2.0
    ry = stats.rankdata(y) - (y.size + 1) / 2.0
    den = np.sqrt(np.dot(rx, rx) * np.dot(ry, ry))
    if den == 0.0:
        return 0.0
    return float(np.clip(np.dot(rx, ry) / den, -1.0, 1.0))


def _sse(X, y, cols):
    A = np.hstack([X[:, cols], np.ones((X.shape[0], 1))]) if cols else np.ones((X.shape[0], 1))
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(r @ r)


def partial_f_pvalue(sse_small, sse_big, n, p_big):
    """p-value of adding one regressor (model with ``p_big`` regressors + bias)."""
    dof = n - p_big - 1
    if dof <= 0:
        return 1.0
    if sse_big <= 0.0:
        return 0.0 if sse_small > 0.0 else 1.0
    f = (sse_small - sse_big) / (sse_big / dof)
    return float(stats.f.sf(max(f, 0.0), 1, dof))


def stepwise_select(X, y, enter_p=ENTER_P, remove_p=REMOVE_P, max_iter=MAX_STEPWISE_ITER):
    """Forward entry of the best SSE-reducing feature while its partial-F p < enter_p,
    then backward removal of features with p > remove_p, repeated to a fixpoint."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    selected = []
    for _ in range(max_iter):
        changed = False
        base = _sse(X, y, selected)
        cands = [j for j in range(m) if j not in selected]
        if cands and len(selected) + 2 < n:
            sses = [_sse(X, y, selected + [j]) for j in cands]
            best = int(np.argmin(sses))
            if partial_f_pvalue(base, sses[best], n, len(selected) + 1) < enter_p:
                selected.append(cands[best])
                changed = True
        while selected:
            full = _sse(X, y, selected)
            pvals = [partial_f_pvalue(_sse(X, y, [c for c in selected if c != j]), full, n, len(selected))
                     for j in selected]
            worst = int(np.argmax(pvals))
            if pvals[worst] > remove_p:
                selected.pop(worst)
                changed = True
            else:
                break
        if not changed:
            break
    return sorted(selected)


def spearman_select(X, y, top=SPEARMAN_TOP):
    rho = np.array([spearman(X[:, j], y) for j in range(X.shape[1])])
    order = sorted(range(X.shape[1]), key=lambda j: (-abs(rho[j]), j))
    return sorted(order[:top])


def select_features(X, y, method=Selection.STEPWISE):
    method = Selection(method)
    if method is Selection.SPEARMAN:
        return spearman_select(X, y)
    return stepwise_select(X, y)


class AmftModel(Model):
    """Column mask plus linear regression on the standardised selected columns."""

    kind = None

    def __init__(self, selected, mean, std, lr, method, **kw):
        super().__init__(N_FEATURES, **kw)
        self.selected = [int(j) for j in selected]
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.lr = lr
        self.method = Selection(method)

    def _predict(self, X):
        if not self.selected:
            return np.full(X.shape[0], self.lr.bias)
        Z = (X[:, self.selected] - self.mean) / self.std
        return self.lr.predict(Z)

    def to_json(self):
        return {
            "kind": "AMFT",
            "p": self.p,
            "hyper": {"selection": self.method.value},
            "parameters": {"selected": self.selected, "mean": self.mean.tolist(),
                           "std": self.std.tolist(), "lr": self.lr.to_json()},
            "seed": self.seed,
            "val_mae": self.val_mae,
        }

    @classmethod
    def from_json(cls, obj):
        q = obj["parameters"]
        return cls(q["selected"], q["mean"], q["std"], model_from_json(q["lr"]),
                   obj["hyper"]["selection"], seed=obj["seed"], val_mae=obj["val_mae"])


def amft_fit(X, y, method=Selection.STEPWISE, seed=0):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[1] != N_FEATURES:
        raise ValueError(f"expected {N_FEATURES} baseline features, got {X.shape[1]}")
    selected = select_features(X, y, method)
    if selected:
        sub = X[:, selected]
        mean = sub.mean(axis=0)
        std = sub.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(len(selected))
        std = np.where(std < 1e-12, 1.0, std)
        lr = lr_fit((sub - mean) / std, y)
    else:
        mean = std = np.zeros(0)
        lr = lr_fit(np.zeros((X.shape[0], 0)), y)
    return AmftModel(selected, mean, std, lr, method, seed=seed)


def amft_predict(model, X):
    return model.predict(X)
