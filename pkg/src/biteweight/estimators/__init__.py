"""Bite-weight regressors behind a common ``fit(X, y, seed) -> Model`` contract."""
import json

from .base import ESTIMATORS, Kind, Model, child_seed, mean_abs_error, split_indices
from .ffnn import FfnnConfig, FfnnModel, ffnn_fit, train_network
from .grnn import GrnnConfig, GrnnModel, grnn_fit, grnn_predict
from .lr import LinearModel, lr_fit
from .svr import SvrConfig, SvrModel, svr_fit, svr_train

_MODELS = {Kind.LR: LinearModel, Kind.SVR: SvrModel, Kind.FFNN: FfnnModel, Kind.GRNN: GrnnModel}


def fit_estimator(kind, X, y, seed=0, configs=None):
    """Fit estimator ``kind`` with its hyper-parameter protocol."""
    kind = Kind(kind)
    configs = configs or {}
    if kind is Kind.LR:
        return lr_fit(X, y, seed=seed)
    if kind is Kind.SVR:
        return svr_fit(X, y, configs.get(Kind.SVR, SvrConfig()), seed=seed)
    if kind is Kind.FFNN:
        return ffnn_fit(X, y, configs.get(Kind.FFNN, FfnnConfig()), seed=seed)
    return grnn_fit(X, y, configs.get(Kind.GRNN, GrnnConfig()), seed=seed)


def predict(model, x):
    return model.predict(x)


def model_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    return _MODELS[Kind(obj["kind"])].from_json(obj)


__all__ = [
    "ESTIMATORS", "Kind", "Model", "child_seed", "mean_abs_error", "split_indices",
    "FfnnConfig", "FfnnModel", "ffnn_fit", "train_network",
    "GrnnConfig", "GrnnModel", "grnn_fit", "grnn_predict",
    "LinearModel", "lr_fit", "SvrConfig", "SvrModel", "svr_fit", "svr_train",
    "fit_estimator", "predict", "model_from_json",
]
