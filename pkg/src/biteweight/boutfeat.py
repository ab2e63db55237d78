"""Timing features of a chewing bout and assembly of the feature sets F1-F5."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .codebook import Encoding
from .dataset import FOODS


class FeatureSet(str, enum.Enum):
    F1 = "F1"  # non-audio
    F2 = "F2"  # audio, BoW
    F3 = "F3"  # audio, VLAD
    F4 = "F4"  # F1 + F2
    F5 = "F5"  # F1 + F3

    @property
    def uses_timing(self):
        return self in (FeatureSet.F1, FeatureSet.F4, FeatureSet.F5)

    @property
    def encoding(self):
        if self in (FeatureSet.F2, FeatureSet.F4):
            return Encoding.BOW
        if self in (FeatureSet.F3, FeatureSet.F5):
            return Encoding.VLAD
        return None

    @property
    def uses_audio(self):
        return self.encoding is not None


FEATURE_SETS = tuple(FeatureSet)
TIMING_NAMES = ("n_chews", "chew_dur_mean", "chew_dur_std", "rate_mean", "rate_std")
ONEHOT_NAMES = tuple(f"food_{f.value}" for f in FOODS)


@dataclass(frozen=True)
class BoutFeatures:
    n_chews: int
    chew_dur_mean: float
    chew_dur_std: float
    rate_mean: float
    rate_std: float
    food_onehot: tuple

    def timing_vector(self):
        return np.array([self.n_chews, self.chew_dur_mean, self.chew_dur_std,
                         self.rate_mean, self.rate_std], dtype=np.float64)


def _mean_std(v):
    if v.size == 0:
        return 0.0, 0.0
    std = float(np.std(v, ddof=1)) if v.size >= 2 else 0.0
    return float(np.mean(v)), std


def interval_stats(starts, stops):
    """(mean, std) of chew durations and of onset-to-onset intervals."""
    dur_mean, dur_std = _mean_std(stops - starts)
    rate_mean, rate_std = _mean_std(np.diff(starts))
    return dur_mean, dur_std, rate_mean, rate_std


def nonaudio_features(bout):
    """Chew count, chew-duration and inter-onset statistics, food indicator.

    The "rate" entries are onset differences t1[i] - t1[i-1] in seconds.
    """
    dur_mean, dur_std, rate_mean, rate_std = interval_stats(bout.starts, bout.stops)
    onehot = tuple(1.0 if bout.food is f else 0.0 for f in FOODS)
    return BoutFeatures(bout.n_chews, dur_mean, dur_std, rate_mean, rate_std, onehot)


def timing_block(bout, all_foods):
    """F1 vector: 5 timing values, plus the food one-hot in the all-foods regime."""
    f = nonaudio_features(bout)
    v = f.timing_vector()
    return np.concatenate([v, f.food_onehot]) if all_foods else v


def feature_length(fs, k, d, all_foods):
    fs = FeatureSet(fs)
    n = 0
    if fs.uses_timing:
        n += len(TIMING_NAMES) + (len(FOODS) if all_foods else 0)
    if fs.encoding is Encoding.BOW:
        n += k
    elif fs.encoding is Encoding.VLAD:
        n += k * d
    return n


def feature_names(fs, k, d, all_foods):
    fs = FeatureSet(fs)
    names = []
    if fs.uses_timing:
        names += list(TIMING_NAMES) + (list(ONEHOT_NAMES) if all_foods else [])
    if fs.encoding is Encoding.BOW:
        names += [f"bow_{j}" for j in range(k)]
    elif fs.encoding is Encoding.VLAD:
        names += [f"vlad_{j}_{t}" for j in range(k) for t in range(d)]
    return names


def assemble(fs, bout, descriptors=None, codebook=None, all_foods=False, timing_scaler=None):
    """Feature vector of one bout for feature set ``fs``.

    ``descriptors`` are the bout's standardised chew descriptors;
    ``timing_scaler`` (a fitted Standardizer) is applied to the F1 block.
    """
    fs = FeatureSet(fs)
    parts = []
    if fs.uses_timing:
        block = timing_block(bout, all_foods)
        parts.append(timing_scaler.apply(block) if timing_scaler is not None else block)
    if fs.uses_audio:
        if codebook is None:
            raise ValueError(f"feature set {fs.value} needs a codebook")
        if descriptors is None:
            raise ValueError(f"feature set {fs.value} needs chew descriptors")
        parts.append(codebook.encode(descriptors, fs.encoding))
    return np.concatenate(parts)


def write_feature_csv(path, names, keys, rows, weights):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bout", "weight_g", *names])
        for key, wt, row in zip(keys, weights, rows):
            w.writerow([key, repr(float(wt)), *(repr(float(v)) for v in row)])
