"""A single trained model with the standardisers and codebook it depends on."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .boutfeat import FeatureSet, assemble
from .chewfeat import Standardizer, recording_descriptors
from .codebook import DEFAULT_K_MAX, Codebook
from .estimators import ESTIMATORS, Kind, model_from_json
from .harness import REGIMES, Context, ExperimentConfig, feature_matrix, fit_cell, fit_fold_inputs
from .estimators.base import child_seed


@dataclass
class Pipeline:
    feature_set: FeatureSet
    regime: str
    model: object
    timing_scaler: Standardizer
    desc_scaler: Standardizer | None = None
    codebook: Codebook | None = None
    seed: int = 0

    def to_json(self):
        return {
            "feature_set": self.feature_set.value,
            "regime": self.regime,
            "seed": self.seed,
            "model": self.model.to_json(),
            "timing_standardizer": self.timing_scaler.to_json(),
            "descriptor_standardizer": self.desc_scaler.to_json() if self.desc_scaler else None,
            "codebook": self.codebook.to_json() if self.codebook else None,
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(
            FeatureSet(obj["feature_set"]), obj["regime"], model_from_json(obj["model"]),
            Standardizer.from_json(obj["timing_standardizer"]),
            Standardizer.from_json(obj["descriptor_standardizer"]) if obj["descriptor_standardizer"] else None,
            Codebook.from_json(obj["codebook"]) if obj["codebook"] else None,
            int(obj["seed"]),
        )

    def predict_recording(self, rec):
        """Predicted weight (g) for every bout of a recording."""
        descs = recording_descriptors(rec) if self.feature_set.uses_audio else [None] * len(rec.bouts)
        rows = []
        for bout, desc in zip(rec.bouts, descs):
            if desc is not None:
                desc = self.desc_scaler.apply(desc)
            rows.append(assemble(self.feature_set, bout, desc, self.codebook,
                                 all_foods=self.regime == "All", timing_scaler=self.timing_scaler))
        return self.model.predict(np.vstack(rows))


def train_pipeline(ds, kind, feature_set, regime="All", seed=0, k_max=DEFAULT_K_MAX):
    """Fit on every bout of ``regime`` (no held-out subject)."""
    kind, fs = Kind(kind), FeatureSet(feature_set)
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    cfg = ExperimentConfig(feature_sets=[fs.value], estimators=[kind.value], regimes=[regime],
                           include_baseline=False, seed=seed, k_max=k_max)
    ctx = Context(ds, cfg)
    keys, _ = ctx.split(subject=None, regime=regime)
    if len(keys) < 2:
        raise ValueError(f"regime {regime} has fewer than 2 bouts")
    inputs = fit_fold_inputs(ctx, keys, regime, child_seed(seed, 0))
    model = fit_cell(ctx, keys, inputs, regime, fs, kind, child_seed(seed, 1, ESTIMATORS.index(kind)))
    return Pipeline(fs, regime, model, inputs.timing_scaler, inputs.desc_scaler, inputs.codebook, seed)


def pipeline_features(ds, feature_set, regime="All", seed=0, k_max=DEFAULT_K_MAX):
    """Feature matrix for every bout of ``regime``, scalers/codebook fit on the same bouts."""
    fs = FeatureSet(feature_set)
    cfg = ExperimentConfig(feature_sets=[fs.value], estimators=["LR"], regimes=[regime],
                           include_baseline=False, seed=seed, k_max=k_max)
    ctx = Context(ds, cfg)
    keys, _ = ctx.split(subject=None, regime=regime)
    inputs = fit_fold_inputs(ctx, keys, regime, child_seed(seed, 0))
    X = feature_matrix(ctx, keys, fs, inputs, regime)
    y = np.array([ctx.by_key[k].bout.weight_g for k in keys])
    k = inputs.codebook.k if inputs.codebook else 0
    return keys, X, y, k
