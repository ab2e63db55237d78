"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
implementation in ``_pycore`` is used.  Set ``BITEWEIGHT_PURE_PYTHON=1`` to
force the fallback.
"""
import contextlib
import os

from . import _pycore

_compiled = None
if not os.environ.get("BITEWEIGHT_PURE_PYTHON"):
    try:
        from . import _core as _compiled
    except ImportError:  # extension not built
        _compiled = None

_BACKENDS = {"python": _pycore}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = _BACKENDS.get("cython", _pycore)


def available():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _active is _compiled and _compiled is not None else "python"


@contextlib.contextmanager
def use_backend(name):
    """Temporarily switch kernels (tests and benchmarks)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available()}")
    prev = _active
    _active = _BACKENDS[name]
    try:
        yield
    finally:
        _active = prev


def katz_fd(x):
    return _active.katz_fd(x)


def assign(X, centroids):
    return _active.assign(X, centroids)


def lloyd(X, centroids, max_iter, tol):
    return _active.lloyd(X, centroids, max_iter, tol)


def smo_solve(K, y, C, eps, tol, max_iter):
    return _active.smo_solve(K, y, C, eps, tol, max_iter)
