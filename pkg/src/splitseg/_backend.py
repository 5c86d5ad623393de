"""Backend selection for the hot kernels.

``SPLITSEG_BACKEND`` picks the implementation at import time: ``numba``
(default when numba imports) or ``numpy``. ``SPLITSEG_THREADS`` caps the
numba thread pool; 0 means sequential.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
    # the system TBB is too old for numba; skip it quietly
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    HAVE_NUMBA = False


def _default_backend():
    name = os.environ.get("SPLITSEG_BACKEND", "").strip().lower()
    if name in ("numpy", "python", "off", "0"):
        return "numpy"
    return "numba" if HAVE_NUMBA else "numpy"


def thread_cap():
    raw = os.environ.get("SPLITSEG_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        return None
    return max(n, 0)


def apply_thread_cap():
    """Push the env cap into numba's pool. Per-pixel loops write disjoint
    outputs, so results do not depend on the thread count."""
    if not HAVE_NUMBA:
        return
    cap = thread_cap()
    if cap is None:
        return
    numba.set_num_threads(max(1, min(cap, numba.config.NUMBA_NUM_THREADS)))


BACKEND = _default_backend()
