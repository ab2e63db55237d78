"""Feed-forward regression network (tanh hidden layers, linear output)
trained full-batch with BFGS on a smoothed mean-absolute-error loss."""
from dataclasses import dataclass

import numpy as np

from .base import Kind, Model, as_xy, child_seed, mean_abs_error, split_indices
from .optim import bfgs_minimize

SMOOTH_MU = 1e-6


@dataclass(frozen=True)
class FfnnConfig:
    depths: tuple = (2, 3)
    widths: tuple = (5, 10, 15, 20)
    lr: float = 0.01
    max_epochs: int = 1000
    gtol: float = 1e-6
    train_frac: float = 0.9

    @property
    def architectures(self):
        return [(w,) * d for d in self.depths for w in self.widths]


def layer_shapes(p, hidden):
    sizes = [p, *hidden, 1]
    return list(zip(sizes[:-1], sizes[1:]))


def n_params(p, hidden):
    return sum(a * b + b for a, b in layer_shapes(p, hidden))


def unpack(theta, p, hidden):
    layers = []
    pos = 0
    for a, b in layer_shapes(p, hidden):
        W = theta[pos:pos + a * b].reshape(a, b)
        pos += a * b
        layers.append((W, theta[pos:pos + b]))
        pos += b
    return layers


def init_params(p, hidden, rng, out_bias=0.0):
    """Glorot-uniform weights, zero hidden biases, output bias given."""
    parts = []
    shapes = layer_shapes(p, hidden)
    for li, (a, b) in enumerate(shapes):
        lim = np.sqrt(6.0 / (a + b))
        parts.append(rng.uniform(-lim, lim, size=a * b))
        bias = np.zeros(b)
        if li == len(shapes) - 1:
            bias[:] = out_bias
        parts.append(bias)
    return np.concatenate(parts)


def forward(theta, X, p, hidden):
    h = X
    for W, b in unpack(theta, p, hidden)[:-1]:
        h = np.tanh(h @ W + b)
    W, b = unpack(theta, p, hidden)[-1]
    return (h @ W + b).ravel()


def loss_and_grad(theta, X, y, hidden, mu=SMOOTH_MU):
    """Mean of sqrt(r^2 + mu^2) and its gradient by back-propagation."""
    p = X.shape[1]
    layers = unpack(theta, p, hidden)
    acts = [X]
    h = X
    for W, b in layers[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W, b = layers[-1]
    r = (h @ W + b).ravel() - y
    smooth = np.sqrt(r * r + mu * mu)
    loss = smooth.mean()
    delta = (r / smooth / y.size)[:, None]
    grads = []
    for li in range(len(layers) - 1, -1, -1):
        W, _ = layers[li]
        a = acts[li]
        grads.append((a.T @ delta).ravel())
        grads.append(delta.sum(axis=0))
        if li > 0:
            delta = (delta @ W.T) * (1.0 - a * a)
    # grads were collected last layer first as (W, b) pairs
    ordered = []
    for li in range(len(layers)):
        k = 2 * (len(layers) - 1 - li)
        ordered += [grads[k], grads[k + 1]]
    return loss, np.concatenate(ordered)


class FfnnModel(Model):
    kind = Kind.FFNN

    def __init__(self, p, hidden, theta, **kw):
        super().__init__(p, **kw)
        self.hidden = tuple(int(h) for h in hidden)
        self.theta = np.asarray(theta, dtype=np.float64)
        if self.theta.size != n_params(self.p, self.hidden):
            raise ValueError("parameter vector does not match the architecture")

    def _predict(self, X):
        return forward(self.theta, X, self.p, self.hidden)

    def _params_json(self):
        return {"hidden": list(self.hidden), "theta": self.theta.tolist()}

    @classmethod
    def from_json(cls, obj):
        q = obj["parameters"]
        return cls(obj["p"], q["hidden"], q["theta"], hyper=obj["hyper"],
                   seed=obj["seed"], val_mae=obj["val_mae"])


def train_network(X, y, hidden, seed, lr=0.01, max_epochs=1000, gtol=1e-6):
    """Train one architecture; returns the model and the optimiser report."""
    X, y = as_xy(X, y)
    p = X.shape[1]
    theta0 = init_params(p, hidden, np.random.default_rng(seed), out_bias=float(np.median(y)))
    res = bfgs_minimize(lambda t: loss_and_grad(t, X, y, hidden), theta0,
                        max_iter=max_epochs, gtol=gtol, step0=lr)
    model = FfnnModel(p, hidden, res.x, seed=seed,
                      hyper={"hidden": list(hidden), "epochs": res.n_iter,
                             "fallback_steps": res.n_fallback, "converged": res.converged,
                             "train_loss": res.fun})
    return model


def ffnn_fit(X, y, cfg=FfnnConfig(), seed=0):
    """Select one of the architectures on a seeded 90/10 split, refit on all data."""
    X, y = as_xy(X, y)
    if X.shape[0] < 10:
        raise ValueError("FFNN needs at least 10 training bouts")
    tr, va = split_indices(X.shape[0], cfg.train_frac, child_seed(seed, 0))
    archs = cfg.architectures
    scores = []
    for a, hidden in enumerate(archs):
        m = train_network(X[tr], y[tr], hidden, child_seed(seed, 1, a), cfg.lr, cfg.max_epochs, cfg.gtol)
        scores.append(mean_abs_error(y[va], m.predict(X[va])))
    best = int(np.argmin(scores))
    model = train_network(X, y, archs[best], child_seed(seed, 1, best), cfg.lr, cfg.max_epochs, cfg.gtol)
    model.seed = seed
    model.val_mae = float(scores[best])
    model.hyper["architectures"] = [list(h) for h in archs]
    model.hyper["val_mae_grid"] = [float(s) for s in scores]
    return model
