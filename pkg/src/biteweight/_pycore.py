"""Pure-Python/numpy versions of the hot kernels.

Each function here has a twin with the same signature in ``_core.pyx``.  The
two must follow the same arithmetic order closely enough that results agree
to rounding; ``tests/test_kernels.py`` checks this.
"""
import numpy as np

TAU = 1e-12


def katz_fd(x):
    x = np.asarray(x, dtype=np.float64)
    steps = x.size - 1
    if steps < 1:
        return 1.0
    length = np.abs(np.diff(x)).sum()
    extent = np.abs(x - x[0]).max()
    if length <= 0.0 or extent <= 0.0:
        return 1.0
    log_n = np.log10(steps)
    denom = log_n + np.log10(extent / length)
    if denom <= 0.0:
        # pathological zig-zag: extent below length/steps
        return 1.0
    return float(log_n / denom)


def assign(X, centroids):
    """Nearest centroid per row (ties -> lowest index) and squared distance."""
    diff = X[:, None, :] - centroids[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(d2, axis=1)
    return labels.astype(np.int64), d2[np.arange(X.shape[0]), labels]


def _update(X, labels, d2, k):
    d = X.shape[1]
    sums = np.zeros((k, d))
    np.add.at(sums, labels, X)
    counts = np.bincount(labels, minlength=k)
    centroids = np.empty((k, d))
    d2 = d2.copy()
    for j in range(k):
        if counts[j] > 0:
            centroids[j] = sums[j] / counts[j]
        else:
            far = int(np.argmax(d2))
            centroids[j] = X[far]
            d2[far] = -1.0
    return centroids


def lloyd(X, centroids, max_iter, tol):
    """Lloyd iterations from the given start.

    Returns ``(centroids, labels, sse, sse_history)``; the history holds the
    SSE after every assignment step and is non-increasing.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.array(centroids, dtype=np.float64, copy=True)
    k = C.shape[0]
    history = []
    labels, d2 = assign(X, C)
    sse = float(d2.sum())
    history.append(sse)
    for _ in range(max_iter):
        C = _update(X, labels, d2, k)
        labels, d2 = assign(X, C)
        new_sse = float(d2.sum())
        history.append(new_sse)
        improved = sse - new_sse
        sse = new_sse
        if improved < tol:
            break
    return C, labels, sse, history


def smo_solve(K, y, C, eps, tol, max_iter):
    """epsilon-SVR dual by SMO with second-order working-set selection.

    Variables are ``beta = [alpha, alpha_star]`` with signs ``z = [+1, -1]``.
    Returns ``(beta, rho, n_iter, converged)``; the regression function is
    ``sum((alpha - alpha_star) * K(x_i, x)) - rho``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    m = 2 * n
    z = np.concatenate([np.ones(n), -np.ones(n)])
    beta = np.zeros(m)
    G = np.concatenate([eps - y, eps + y])
    kdiag = np.diag(K).copy()
    idx = np.arange(m) % n

    converged = False
    it = 0
    while it < max_iter:
        upper = beta >= C
        lower = beta <= 0.0
        # i: argmax of -z*G over I_up
        up_mask = np.where(z > 0, ~upper, ~lower)
        low_mask = np.where(z > 0, ~lower, ~upper)
        score = -z * G
        cand = np.where(up_mask, score, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        if not np.isfinite(gmax):
            converged = True
            break
        # j: second-order choice over I_low
        low_score = np.where(low_mask, -score, -np.inf)
        gmax2 = low_score.max()
        if gmax + gmax2 < tol:
            converged = True
            break
        ki = K[idx[i], idx]
        grad_diff = gmax + z * G
        quad = kdiag[idx[i]] + kdiag[idx] - 2.0 * ki
        quad = np.where(quad > 0, quad, TAU)
        obj = np.where(low_mask & (grad_diff > 0), -(grad_diff * grad_diff) / quad, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            converged = True
            break
        it += 1

        Qi = z[i] * z * ki
        Qj = z[j] * z * K[idx[j], idx]
        old_i, old_j = beta[i], beta[j]
        ai, aj = old_i, old_j
        if z[i] != z[j]:
            qc = kdiag[idx[i]] + kdiag[idx[j]] + 2.0 * Qi[j]
            if qc <= 0:
                qc = TAU
            delta = (-G[i] - G[j]) / qc
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0:
                    ai = 0.0
                    aj = -diff
            if diff > 0:
                if ai > C:
                    ai = C
                    aj = C - diff
            else:
                if aj > C:
                    aj = C
                    ai = C + diff
        else:
            qc = kdiag[idx[i]] + kdiag[idx[j]] - 2.0 * Qi[j]
            if qc <= 0:
                qc = TAU
            delta = (G[i] - G[j]) / qc
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai = C
                    aj = total - C
            else:
                if aj < 0:
                    aj = 0.0
                    ai = total
            if total > C:
                if aj > C:
                    aj = C
                    ai = total - C
            else:
                if ai < 0:
                    ai = 0.0
                    aj = total
        beta[i], beta[j] = ai, aj
        G += Qi * (ai - old_i) + Qj * (aj - old_j)

    return beta, _rho(beta, G, z, C), it, converged


def _rho(beta, G, z, C):
    yg = z * G
    upper = beta >= C
    lower = beta <= 0.0
    free = ~upper & ~lower
    if free.any():
        return float(yg[free].mean())
    ub_mask = (upper & (z < 0)) | (lower & (z > 0))
    lb_mask = (upper & (z > 0)) | (lower & (z < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)
