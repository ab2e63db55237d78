"""epsilon-SVR with an RBF kernel, trained by SMO, with a (C, gamma) grid search."""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .. import kernels
from .base import Kind, Model, as_xy, mean_abs_error, split_indices


@dataclass(frozen=True)
class SvrConfig:
    c_exponents: tuple = (-2, -1, 0, 1, 2)
    gamma_exponents: tuple = (-1, 0, 1, 2, 3)  # gamma = 10**i / n_features
    epsilon: float | None = None  # None: 0.1 * std of the training targets
    train_frac: float = 0.7
    tol: float = 1e-5
    max_iter: int = 2_000_000


def rbf_kernel(A, B, gamma):
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


class SvrModel(Model):
    kind = Kind.SVR

    def __init__(self, support, coef, bias, gamma, **kw):
        support = np.atleast_2d(np.asarray(support, dtype=np.float64))
        super().__init__(support.shape[1], **kw)
        self.support = support
        self.coef = np.asarray(coef, dtype=np.float64)
        self.bias = float(bias)
        self.gamma = float(gamma)

    def _predict(self, X):
        if self.coef.size == 0:
            return np.full(X.shape[0], self.bias)
        return rbf_kernel(X, self.support, self.gamma) @ self.coef + self.bias

    def _params_json(self):
        return {"support": self.support.tolist(), "coef": self.coef.tolist(),
                "bias": self.bias, "gamma": self.gamma}

    @classmethod
    def from_json(cls, obj):
        q = obj["parameters"]
        support = np.asarray(q["support"], dtype=np.float64).reshape(len(q["coef"]), obj["p"])
        return cls(support, q["coef"], q["bias"], q["gamma"], hyper=obj["hyper"],
                   seed=obj["seed"], val_mae=obj["val_mae"])


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    alpha_star: np.ndarray
    bias: float
    n_iter: int
    converged: bool


def solve_dual(K, y, C, eps, tol=1e-5, max_iter=2_000_000):
    beta, rho, n_iter, converged = kernels.smo_solve(K, y, float(C), float(eps), tol, max_iter)
    n = y.size
    return DualSolution(beta[:n], beta[n:], -rho, n_iter, converged)


def svr_train(X, y, C, gamma, eps, tol=1e-5, max_iter=2_000_000, seed=0):
    """Single epsilon-SVR fit at fixed hyper-parameters."""
    X, y = as_xy(X, y)
    sol = solve_dual(rbf_kernel(X, X, gamma), y, C, eps, tol, max_iter)
    if not sol.converged:
        warnings.warn(f"SMO stopped at the iteration cap ({max_iter}) for C={C}, gamma={gamma}",
                      RuntimeWarning, stacklevel=2)
    coef = sol.alpha - sol.alpha_star
    keep = coef != 0.0
    return SvrModel(X[keep], coef[keep], sol.bias, gamma, seed=seed,
                    hyper={"C": float(C), "gamma": float(gamma), "epsilon": float(eps),
                           "converged": bool(sol.converged), "n_iter": int(sol.n_iter)})


def svr_fit(X, y, cfg=SvrConfig(), seed=0):
    """Grid-search C and gamma on a seeded 70/30 split, refit on all data."""
    X, y = as_xy(X, y)
    n, p = X.shape
    if n < 4:
        raise ValueError("SVR needs at least 4 training bouts")
    eps = cfg.epsilon if cfg.epsilon is not None else 0.1 * float(np.std(y, ddof=1))
    tr, va = split_indices(n, cfg.train_frac, seed)
    grid = [(10.0 ** i, 10.0 ** j / p) for i in cfg.c_exponents for j in cfg.gamma_exponents]
    scores = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for C, gamma in grid:
            m = svr_train(X[tr], y[tr], C, gamma, eps, cfg.tol, cfg.max_iter)
            scores.append(mean_abs_error(y[va], m.predict(X[va])))
    best = int(np.argmin(scores))
    C, gamma = grid[best]
    model = svr_train(X, y, C, gamma, eps, cfg.tol, cfg.max_iter, seed=seed)
    model.val_mae = float(scores[best])
    model.hyper["val_mae_grid"] = [float(s) for s in scores]
    return model
