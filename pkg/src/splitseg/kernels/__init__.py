"""Hot numeric kernels with a compiled (numba) and a pure-numpy path.

The active path comes from ``SPLITSEG_BACKEND`` and can be switched at runtime
with :func:`set_backend`. Callers go through the module-level functions here,
never through the implementation modules directly.
"""

import contextlib

import numpy as np

from .. import _backend
from . import _numpy

if _backend.HAVE_NUMBA:
    from . import _numba
else:  # pragma: no cover
    _numba = None

_impl = None


def set_backend(name):
    global _impl
    if name == "numba":
        if _numba is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        _backend.apply_thread_cap()
        _impl = _numba
    elif name == "numpy":
        _impl = _numpy
    else:
        raise ValueError(f"unknown backend {name!r}")
    _backend.BACKEND = name


def get_backend():
    return _backend.BACKEND


@contextlib.contextmanager
def use_backend(name):
    prev = get_backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def conv_direct(u, w):
    return _impl.conv_direct(np.ascontiguousarray(u, dtype=float), np.ascontiguousarray(w, dtype=float))


def conv_separable(u, col, row):
    return _impl.conv_separable(
        np.ascontiguousarray(u, dtype=float),
        np.ascontiguousarray(col, dtype=float),
        np.ascontiguousarray(row, dtype=float),
    )


def seq_sum(u):
    return float(_impl.seq_sum(np.ascontiguousarray(u, dtype=float).ravel()))


def dw_solve(ubar, c):
    return _impl.dw_solve(np.ascontiguousarray(ubar, dtype=float), float(c))


def logit_solve(ubar, mu, gamma):
    return _impl.logit_solve(np.ascontiguousarray(ubar, dtype=float), float(mu), float(gamma))


set_backend(_backend.BACKEND)
