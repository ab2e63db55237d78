# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Katz fractal dimension, Lloyd k-means, epsilon-SVR SMO.

Signatures and arithmetic mirror ``biteweight._pycore``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log10, INFINITY

cnp.import_array()

cdef double TAU = 1e-12


def katz_fd(x):
    cdef const double[::1] v = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i
    cdef double length = 0.0, extent = 0.0, t, log_n, denom
    if n < 2:
        return 1.0
    for i in range(1, n):
        length += fabs(v[i] - v[i - 1])
        t = fabs(v[i] - v[0])
        if t > extent:
            extent = t
    if length <= 0.0 or extent <= 0.0:
        return 1.0
    log_n = log10(<double>(n - 1))
    denom = log_n + log10(extent / length)
    if denom <= 0.0:
        return 1.0
    return log_n / denom


cdef void _assign(const double[:, ::1] X, const double[:, ::1] C,
                  long long[::1] labels, double[::1] d2) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], k = C.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, t, best
    cdef double s, diff, best_s
    for i in range(n):
        best = 0
        best_s = INFINITY
        for j in range(k):
            s = 0.0
            for t in range(d):
                diff = X[i, t] - C[j, t]
                s += diff * diff
            if s < best_s:
                best_s = s
                best = j
        labels[i] = best
        d2[i] = best_s


def assign(X, centroids):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Cv = np.ascontiguousarray(centroids, dtype=np.float64)
    labels = np.empty(Xv.shape[0], dtype=np.int64)
    d2 = np.empty(Xv.shape[0], dtype=np.float64)
    _assign(Xv, Cv, labels, d2)
    return labels, d2


cdef void _accumulate(const double[:, ::1] X, const long long[::1] labels,
                      double[:, ::1] C) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], k = C.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, t
    cdef long long lab
    for j in range(k):
        for t in range(d):
            C[j, t] = 0.0
    for i in range(n):
        lab = labels[i]
        for t in range(d):
            C[lab, t] += X[i, t]


def _lloyd_update(X, labels, d2, Py_ssize_t k):
    cdef const double[:, ::1] Xv = X
    cdef const long long[::1] lv = labels
    cdef double[::1] dv = np.array(d2, dtype=np.float64, copy=True)
    cdef Py_ssize_t d = Xv.shape[1], j, t, far, i
    cdef double best
    cdef double[:, ::1] C = np.zeros((k, d), dtype=np.float64)
    counts = np.bincount(labels, minlength=k)
    cdef const long long[::1] cv = counts.astype(np.int64)
    _accumulate(Xv, lv, C)
    for j in range(k):
        if cv[j] > 0:
            for t in range(d):
                C[j, t] = C[j, t] / cv[j]
        else:
            far = 0
            best = -INFINITY
            for i in range(Xv.shape[0]):
                if dv[i] > best:
                    best = dv[i]
                    far = i
            for t in range(d):
                C[j, t] = Xv[far, t]
            dv[far] = -1.0
    return np.asarray(C)


def lloyd(X, centroids, Py_ssize_t max_iter, double tol):
    Xc = np.ascontiguousarray(X, dtype=np.float64)
    C = np.array(centroids, dtype=np.float64, copy=True, order="C")
    cdef Py_ssize_t k = C.shape[0], it
    labels, d2 = assign(Xc, C)
    cdef double sse = float(d2.sum()), new_sse
    history = [sse]
    for it in range(max_iter):
        C = _lloyd_update(Xc, labels, d2, k)
        labels, d2 = assign(Xc, C)
        new_sse = float(d2.sum())
        history.append(new_sse)
        improved = sse - new_sse
        sse = new_sse
        if improved < tol:
            break
    return C, labels, sse, history


cdef double _rho(double[::1] beta, double[::1] G, double[::1] z, double C, Py_ssize_t m):
    cdef Py_ssize_t t
    cdef double yg, ub = INFINITY, lb = -INFINITY, sum_free = 0.0
    cdef Py_ssize_t nr_free = 0
    for t in range(m):
        yg = z[t] * G[t]
        if beta[t] >= C:
            if z[t] < 0:
                if yg < ub:
                    ub = yg
            else:
                if yg > lb:
                    lb = yg
        elif beta[t] <= 0.0:
            if z[t] > 0:
                if yg < ub:
                    ub = yg
            else:
                if yg > lb:
                    lb = yg
        else:
            nr_free += 1
            sum_free += yg
    if nr_free > 0:
        return sum_free / nr_free
    return (ub + lb) / 2.0


def smo_solve(K, y, double C, double eps, double tol, long long max_iter):
    cdef const double[:, ::1] Kv = np.ascontiguousarray(K, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0], m = 2 * n, t, i, j, ii, jj
    beta_arr = np.zeros(m, dtype=np.float64)
    G_arr = np.empty(m, dtype=np.float64)
    z_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] beta = beta_arr
    cdef double[::1] G = G_arr
    cdef double[::1] z = z_arr
    for t in range(n):
        z[t] = 1.0
        z[t + n] = -1.0
        G[t] = eps - yv[t]
        G[t + n] = eps + yv[t]

    cdef long long it = 0
    cdef bint converged = False
    cdef bint up, low
    cdef double gmax, gmax2, score, grad_diff, quad, obj, obj_min, cand
    cdef double old_i, old_j, ai, aj, qc, delta, diff, total, dai, daj, qij
    cdef Py_ssize_t tn

    with nogil:
        while it < max_iter:
            gmax = -INFINITY
            i = -1
            for t in range(m):
                if z[t] > 0:
                    up = beta[t] < C
                else:
                    up = beta[t] > 0.0
                if up:
                    score = -z[t] * G[t]
                    if score > gmax:
                        gmax = score
                        i = t
            if i < 0:
                converged = True
                break
            ii = i % n
            gmax2 = -INFINITY
            j = -1
            obj_min = INFINITY
            for t in range(m):
                if z[t] > 0:
                    low = beta[t] > 0.0
                else:
                    low = beta[t] < C
                if not low:
                    continue
                cand = z[t] * G[t]
                if cand > gmax2:
                    gmax2 = cand
                grad_diff = gmax + cand
                if grad_diff > 0:
                    tn = t % n
                    quad = Kv[ii, ii] + Kv[tn, tn] - 2.0 * Kv[ii, tn]
                    if quad <= 0:
                        quad = TAU
                    obj = -(grad_diff * grad_diff) / quad
                    if obj < obj_min:
                        obj_min = obj
                        j = t
            if gmax + gmax2 < tol:
                converged = True
                break
            if j < 0:
                converged = True
                break
            it += 1

            jj = j % n
            qij = z[i] * z[j] * Kv[ii, jj]
            old_i = beta[i]
            old_j = beta[j]
            ai = old_i
            aj = old_j
            if z[i] != z[j]:
                qc = Kv[ii, ii] + Kv[jj, jj] + 2.0 * qij
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
                qc = Kv[ii, ii] + Kv[jj, jj] - 2.0 * qij
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
            beta[i] = ai
            beta[j] = aj
            dai = ai - old_i
            daj = aj - old_j
            for t in range(m):
                tn = t % n
                G[t] += z[i] * z[t] * Kv[ii, tn] * dai + z[j] * z[t] * Kv[jj, tn] * daj

    rho = _rho(beta, G, z, C, m)
    return beta_arr, rho, int(it), bool(converged)
