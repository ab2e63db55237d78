"""BFGS with backtracking line search and a gradient-step fallback."""
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

# above this many parameters the inverse Hessian is kept in limited-memory form
DENSE_MAX_PARAMS = 1500
LBFGS_MEMORY = 20


@dataclass
class BfgsResult:
    x: np.ndarray
    fun: float
    n_iter: int
    n_fallback: int
    converged: bool


def _two_loop(g, pairs, gamma):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    r = gamma * q
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ r)
        r += (a - b) * s
    return r


def bfgs_minimize(fun, x0, max_iter=1000, gtol=1e-6, step0=0.01, c1=1e-4,
                  max_halvings=30, dense_max=DENSE_MAX_PARAMS):
    """Minimise ``fun(x) -> (f, grad)``.

    The first direction is ``-step0 * grad``; afterwards the inverse-Hessian
    estimate is seeded with the usual s'y / y'y scaling.  When the line search
    cannot satisfy the Armijo condition a plain gradient step of size
    ``step0`` is taken and the curvature memory is reset.  The lowest-loss
    iterate seen is returned.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    n = x.size
    dense = n <= dense_max
    f, g = fun(x)
    H = None
    pairs = deque(maxlen=LBFGS_MEMORY)
    gamma = step0
    best_x, best_f = x.copy(), f
    n_fallback = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) < gtol:
            converged = True
            it -= 1
            break
        if dense:
            d = -(H @ g) if H is not None else -step0 * g
        else:
            d = -_two_loop(g, list(pairs), gamma)
        slope = g @ d
        if not slope < 0:
            H, gamma = None, step0
            pairs.clear()
            d = -step0 * g
            slope = g @ d
        t = 1.0
        accepted = False
        for _ in range(max_halvings):
            x_new = x + t * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + c1 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            n_fallback += 1
            x_new = x - step0 * g
            f_new, g_new = fun(x_new)
            H, gamma = None, step0
            pairs.clear()
            x, f, g = x_new, f_new, g_new
        else:
            s = x_new - x
            yv = g_new - g
            sy = s @ yv
            if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
                if dense:
                    if H is None:
                        H = np.asfortranarray(np.eye(n) * (sy / (yv @ yv)))
                    rho = 1.0 / sy
                    Hy = H @ yv
                    # rank-2 update in place:
                    # H += s (c s - rho Hy)^T - rho Hy s^T, c = rho^2 y'Hy + rho
                    c = rho * rho * (yv @ Hy) + rho
                    H = dger(1.0, s, c * s - rho * Hy, a=H, overwrite_a=1)
                    H = dger(-rho, Hy, s, a=H, overwrite_a=1)
                else:
                    pairs.append((s, yv, 1.0 / sy))
                    gamma = sy / (yv @ yv)
            x, f, g = x_new, f_new, g_new
        if f < best_f:
            best_x, best_f = x.copy(), f
    return BfgsResult(best_x, float(best_f), it, n_fallback, converged)
